from .config import ExperimentConfig, load_config, write_config
from .experiments import (
    codec_sweep,
    load_sensing,
    nearest_checkpoint,
    records_from_sweep,
    run_compression_baselines,
    run_fixed_ratio_baseline,
    run_jscc_baseline,
    train_link,
    train_sensing,
)
from .report import (
    CSV_HEADER,
    RunRecord,
    RunRow,
    emit_report,
    matched_points,
    read_report_csv,
    render_curves_svg,
    write_report_csv,
)

__all__ = [
    "ExperimentConfig", "load_config", "write_config",
    "train_sensing", "run_fixed_ratio_baseline", "train_link",
    "run_compression_baselines", "run_jscc_baseline",
    "codec_sweep", "records_from_sweep", "load_sensing", "nearest_checkpoint",
    "RunRecord", "RunRow", "CSV_HEADER",
    "emit_report", "write_report_csv", "read_report_csv", "render_curves_svg",
    "matched_points",
]
