"""
check_versions.py

Verifies that the numerical stack is installed at the pinned versions.
Reported by `cli selftest`; also runnable on its own.
"""

# -------------------- IMPORTS --------------------
# Standard Library
import importlib.metadata as metadata
from typing import Dict, Optional, Tuple

# -------------------- CONFIGURATION --------------------
# Pinned versions for the packages the library imports (kept in step with requirements.txt)
EXPECTED_VERSIONS = {
    "numpy": "2.1.3",
    "scipy": "1.14.1",
    "mpmath": "1.3.0",
    "pandas": "2.2.3",
    "pydantic": "2.10.6",
    "python-dotenv": "1.1.1",
    "asgiref": "3.8.1",
    "pytest": "8.3.4",
}


# -------------------- VERSION CHECK LOGIC --------------------
def installed_versions(expected: Dict[str, str] = EXPECTED_VERSIONS) -> Dict[str, Tuple[Optional[str], str]]:
    """
    Map each package to (installed version or None, expected version).

    Args:
        expected (Dict[str, str]): Package name to pinned version.

    Returns:
        Dict[str, Tuple[Optional[str], str]]: Installed and expected versions per package.
    """
    report = {}
    for pkg, required in expected.items():
        try:
            report[pkg] = (metadata.version(pkg), required)
        except metadata.PackageNotFoundError:
            report[pkg] = (None, required)
    return report


def format_versions(report: Dict[str, Tuple[Optional[str], str]]) -> str:
    lines = []
    for pkg, (installed, required) in report.items():
        if installed is None:
            lines.append(f"{pkg}: Not installed")
        elif installed == required:
            lines.append(f"{pkg}: {installed}")
        else:
            lines.append(f"{pkg}: {installed} (expected {required})")
    return "\n".join(lines)


if __name__ == "__main__":
    print(format_versions(installed_versions()))
