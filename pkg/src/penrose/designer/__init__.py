"""Designer console: the only component that holds the private key."""
from .analytics import (AppRegistry, DecryptedASH, UtilizationBreakdown, coverage_report, error_report,
                        export_analytics, utilization_breakdown)
from .console import decrypt_report, fetch_and_decrypt, load_ashes, save_ashes

__all__ = ["AppRegistry", "DecryptedASH", "UtilizationBreakdown", "coverage_report", "decrypt_report",
           "error_report", "export_analytics", "fetch_and_decrypt", "load_ashes", "save_ashes",
           "utilization_breakdown"]
