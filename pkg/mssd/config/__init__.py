from mssd.config.run_config import RunConfig, resolve_run_config
from mssd.config.settings import Settings, get_settings, settings

__all__ = ["RunConfig", "Settings", "get_settings", "resolve_run_config", "settings"]
