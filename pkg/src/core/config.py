import os
from dotenv import load_dotenv

load_dotenv()

# figure names resolve to the preset that reproduces them
PRESET_ALIASES: dict[str, str] = {
    "fig1a": "piecewise_tgv_fourier",
    "fig1b": "piecewise_tgv_accuracy",
    "fig2a": "sparse_rademacher",
    "fig2b": "sparse_phase_transition",
    "fig2c": "kc_scaling",
    "fig3a": "qd_fourier_tgv",
    "fig3b": "qd_rademacher_tgv",
    "fig3c": "qd_comparison",
    "fig4": "pulse_budget",
}


class Settings:
    output_dir: str = os.getenv("CSQNS_OUTPUT_DIR", "./runs")
    jobs: int = int(os.getenv("CSQNS_JOBS", "1"))
    log_level: str = os.getenv("CSQNS_LOG_LEVEL", "INFO").upper()

    debug_errors: bool = os.getenv("CSQNS_DEBUG_ERRORS", "false").lower() in ("1", "true", "yes")
    full_scale: bool = os.getenv("CSQNS_FULL_SCALE", "false").lower() in ("1", "true", "yes")

    full_trials: int = 100  # trials per sweep point at full scale
    presets_dir: str = os.path.join(
        os.path.dirname(os.path.dirname(os.path.dirname(os.path.abspath(__file__)))),
        "data",
        "presets",
    )

    @property
    def shipped_presets(self) -> list[str]:
        if not os.path.isdir(self.presets_dir):
            return []
        return sorted(
            name.removesuffix(".toml")
            for name in os.listdir(self.presets_dir)
            if name.endswith(".toml")
        )

    @property
    def preset_names(self) -> list[str]:
        shipped = self.shipped_presets
        aliases = [alias for alias, target in PRESET_ALIASES.items() if target in shipped]
        return sorted(shipped + aliases)

    def preset_path(self, name: str) -> str:
        return os.path.join(self.presets_dir, f"{PRESET_ALIASES.get(name, name)}.toml")


settings = Settings()
