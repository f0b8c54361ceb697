"""Configuration module for tsd-lab."""

from tsd_lab.config.settings import LabSettings, get_lab_settings

__all__ = ["LabSettings", "get_lab_settings"]
