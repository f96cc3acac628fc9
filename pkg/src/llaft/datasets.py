"""Bundled datasets."""
from importlib import resources


def rhdnase_path() -> str:
    """Path to the bundled cystic-fibrosis trial CSV (time to first pulmonary
    exacerbation; 645 subjects, treatment indicator and FEV covariates).

    The file is a synthetic stand-in generated from a log-logistic AFT model
    calibrated to published analyses of the rhDNase trial; see
    scripts/make_rhdnase_csv.py in the source tree.
    """
    return str(resources.files("llaft").joinpath("data/rhdnase.csv"))
