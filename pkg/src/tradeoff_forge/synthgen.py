"""Seeded synthetic AML transaction data.

Rows are transactions on accounts held at one institution. Account-holder
attributes are drawn once per holder and repeated across that holder's
transactions. The ground-truth label comes from a logistic model over a
configurable set of signal features; the intercept is solved so the expected
positive rate matches ``positive_rate``, and ``disparity_strength`` adds a
log-odds shift to one gender. Profession is drawn with a gender skew so that
it acts as a proxy once Gender is dropped from model inputs.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np
import pandas as pd
from scipy.optimize import brentq
from scipy.special import expit

from .data import LABEL, Dataset, case_study_schema
from .errors import GenError, SplitError

COUNTRIES = (
    "AT", "BE", "BG", "CH", "CY", "CZ", "DE", "DK", "EE", "ES",
    "FI", "FR", "GB", "GR", "HR", "HU", "IE", "IT", "LT", "LU",
    "LV", "MT", "NL", "PA", "PL", "PT", "RO", "SE", "AE", "KY",
)
INDUSTRIES = (
    "Agriculture", "Construction", "Crypto Assets", "Energy", "Finance",
    "Gambling", "Healthcare", "Manufacturing", "Real Estate", "Retail",
    "Technology", "Transport",
)
PROFESSIONS = (
    "Accountant", "Consultant", "Engineer", "Entrepreneur", "Lawyer",
    "Nurse", "Physician", "Retired", "Teacher", "Trader",
)
CURRENCIES = ("EUR", "USD", "GBP", "CHF", "JPY")

DEFAULT_DOMAINS = {
    "Gender": ("F", "M"),
    "Legal Domicile": COUNTRIES,
    "Tax Residency": COUNTRIES,
    "Source of Wealth Industry": INDUSTRIES,
    "Profession": PROFESSIONS,
    "PEP Status": ("No", "Yes"),
    "Direction": ("incoming", "outgoing"),
    "Sender Country": COUNTRIES,
    "Receiver Country": COUNTRIES,
    "Transaction Type": ("cash", "securities"),
    "Transaction Currency": CURRENCIES,
}

HOME_COUNTRY = "LU"
HIGH_RISK_COUNTRIES = ("AE", "CY", "KY", "MT", "PA")
HIGH_RISK_INDUSTRIES = ("Crypto Assets", "Gambling", "Real Estate")

# disparity_strength = 1 corresponds to this many log-odds units.
DISPARITY_LOGIT_SCALE = 3.0

DEFAULT_SIGNALS = (
    ("PEP Status", 2.5),
    ("Transaction Type", 1.5),
    ("Receiver Country", 2.5),
    ("Sender Country", 2.0),
    ("Amount", 1.2),
    ("Source of Wealth Industry", 1.5),
    ("Tax Residency", 1.2),
)


@dataclass(frozen=True)
class GenConfig:
    n_rows: int = 10000
    positive_rate: float = 0.10
    disparity_strength: float = 0.0
    signal_features: tuple = DEFAULT_SIGNALS
    seed: int = 42
    domains: dict = field(default_factory=lambda: dict(DEFAULT_DOMAINS))
    protected_group: str = "M"
    rows_per_holder: int = 5

    def validate(self):
        if self.n_rows < 100:
            raise GenError("n_rows must be ≥ 100")
        if not 0 < self.positive_rate < 1:
            raise GenError("positive_rate must be in (0, 1)")
        if not 0 <= self.disparity_strength <= 1:
            raise GenError("disparity_strength must be in [0, 1]")
        for name, values in self.domains.items():
            if len(values) == 0:
                raise GenError(f"empty categorical domain for {name!r}")
        if self.protected_group not in self.domains["Gender"]:
            raise GenError("protected_group not in the Gender domain")

    def to_dict(self):
        d = asdict(self)
        d["signal_features"] = [list(s) for s in self.signal_features]
        d["domains"] = {k: list(v) for k, v in self.domains.items()}
        return d


def _signal_column(name, frame, domains):
    """Per-row signal in roughly unit scale for one configured feature."""
    if name == "PEP Status":
        return (frame[name] == "Yes").to_numpy(float)
    if name == "Transaction Type":
        return (frame[name] == "cash").to_numpy(float)
    if name in ("Receiver Country", "Sender Country", "Legal Domicile"):
        return frame[name].isin(HIGH_RISK_COUNTRIES).to_numpy(float)
    if name == "Source of Wealth Industry":
        return frame[name].isin(HIGH_RISK_INDUSTRIES).to_numpy(float)
    if name == "Tax Residency":
        return (frame["Tax Residency"] != frame["Legal Domicile"]).to_numpy(float)
    if name == "Direction":
        return (frame[name] == "incoming").to_numpy(float)
    if name in ("Amount", "Total Estimated Assets"):
        x = np.log(frame[name].to_numpy(float))
        return (x - x.mean()) / x.std()
    raise GenError(f"no signal definition for feature {name!r}")


def _choice(rng, values, size, p=None):
    return np.asarray(values, dtype=object)[rng.choice(len(values), size=size, p=p)]


def _account_numbers(rng, country, size):
    digits = rng.integers(0, 10**10, size=size)
    check = rng.integers(10, 100, size=size)
    return np.array([f"{c}{k:02d}SYNB{d:010d}" for c, k, d in zip(country, check, digits)], dtype=object)


def generate(config: GenConfig) -> Dataset:
    """Generate one synthetic dataset; a pure function of ``config``."""
    config.validate()
    dom = {k: tuple(v) for k, v in config.domains.items()}
    features_ss, label_ss = np.random.SeedSequence(config.seed).spawn(2)
    rng = np.random.default_rng(features_ss)
    n = config.n_rows

    n_holders = max(1, n // config.rows_per_holder)
    genders = dom["Gender"]
    h_gender = _choice(rng, genders, n_holders)
    h_domicile = _choice(rng, dom["Legal Domicile"], n_holders)
    same_tax = rng.random(n_holders) < 0.85
    h_tax = np.where(same_tax, h_domicile, _choice(rng, dom["Tax Residency"], n_holders))
    h_industry = _choice(rng, dom["Source of Wealth Industry"], n_holders)
    h_assets = np.round(rng.lognormal(12.0, 1.2, n_holders), 2)
    # Gender-skewed profession mix: profession is a proxy for gender.
    profs = dom["Profession"]
    skew = np.linspace(-1.5, 1.5, len(profs))
    h_prof = np.empty(n_holders, dtype=object)
    for gi, g in enumerate(genders):
        mask = h_gender == g
        logits = skew if gi % 2 == 0 else -skew
        p = np.exp(logits) / np.exp(logits).sum()
        h_prof[mask] = _choice(rng, profs, int(mask.sum()), p=p)
    h_pep = np.where(rng.random(n_holders) < 0.04, "Yes", "No").astype(object)
    home = HOME_COUNTRY if HOME_COUNTRY in dom["Sender Country"] else dom["Sender Country"][0]
    h_account = _account_numbers(rng, [home] * n_holders, n_holders)

    holder = rng.integers(0, n_holders, size=n)
    direction = _choice(rng, dom["Direction"], n)
    counter_country = _choice(rng, dom["Receiver Country"], n)
    counter_account = _account_numbers(rng, counter_country, n)
    outgoing = direction == "outgoing"
    sender_country = np.where(outgoing, home, counter_country)
    receiver_country = np.where(outgoing, counter_country, home)
    sender_account = np.where(outgoing, h_account[holder], counter_account)
    receiver_account = np.where(outgoing, counter_account, h_account[holder])
    days = rng.integers(0, 366, size=n)
    dates = (np.datetime64("2024-01-01") + days.astype("timedelta64[D]")).astype(str)
    tx_type = _choice(rng, dom["Transaction Type"], n, p=None)
    amount = np.round(rng.lognormal(7.0, 1.4, n) + 0.01, 2)
    currencies = dom["Transaction Currency"]
    cur_p = None
    if len(currencies) > 1:
        cur_p = np.full(len(currencies), 0.3 / (len(currencies) - 1))
        cur_p[0] = 0.7
    currency = _choice(rng, currencies, n, p=cur_p)

    frame = pd.DataFrame({
        "Gender": h_gender[holder],
        "Legal Domicile": h_domicile[holder],
        "Tax Residency": h_tax[holder],
        "Source of Wealth Industry": h_industry[holder],
        "Total Estimated Assets": h_assets[holder],
        "Profession": h_prof[holder],
        "PEP Status": h_pep[holder],
        "Direction": direction,
        "Sender Account Number": sender_account,
        "Sender Country": sender_country,
        "Receiver Account Number": receiver_account,
        "Receiver Country": receiver_country,
        "Transaction Date": dates,
        "Transaction Type": tx_type,
        "Amount": amount,
        "Transaction Currency": currency,
    })

    eta = np.zeros(n)
    for name, effect in config.signal_features:
        eta += float(effect) * _signal_column(name, frame, dom)
    shift = config.disparity_strength * DISPARITY_LOGIT_SCALE
    eta += shift * (frame["Gender"].to_numpy() == config.protected_group)
    target = config.positive_rate
    intercept = brentq(lambda b: expit(b + eta).mean() - target, -50.0, 50.0, xtol=1e-12)
    u = np.random.default_rng(label_ss).random(n)
    frame[LABEL] = (u < expit(intercept + eta)).astype(np.int64)

    schema = case_study_schema(dom)
    tags = (
        f"synthgen seed={config.seed} n={n} positive_rate={config.positive_rate}"
        f" disparity={config.disparity_strength}",
    )
    return Dataset(schema, frame, tags)


def _largest_remainder(total, fractions):
    raw = [total * f for f in fractions]
    sizes = [math.floor(r) for r in raw]
    order = sorted(range(len(raw)), key=lambda i: (-(raw[i] - sizes[i]), i))
    for i in order[: total - sum(sizes)]:
        sizes[i] += 1
    return sizes


def split(dataset: Dataset, fractions, seed) -> tuple[Dataset, Dataset, Dataset]:
    """Label-stratified train/validation/test partition.

    Split sizes follow ``fractions`` by largest remainder; each split's
    positive count is the proportional share of all positives.
    """
    if abs(sum(fractions) - 1.0) > 1e-9 or any(f <= 0 for f in fractions):
        raise SplitError("fractions must be positive and sum to 1.0")
    labels = dataset.labels
    n = len(labels)
    sizes = _largest_remainder(n, fractions)
    pos_idx = np.flatnonzero(labels == 1)
    neg_idx = np.flatnonzero(labels == 0)
    pos_sizes = _largest_remainder(len(pos_idx), fractions)
    # Keep overall sizes exact: shift positives where the negative quota would go negative.
    neg_sizes = [s - p for s, p in zip(sizes, pos_sizes)]
    if any(v < 0 for v in neg_sizes) or sum(neg_sizes) != len(neg_idx):
        raise SplitError("cannot stratify with the requested fractions")
    if min(pos_sizes) < 2:
        raise SplitError("a split would contain fewer than 2 positive rows")
    rng = np.random.default_rng(np.random.SeedSequence([int(seed), 0x5D11]))
    pos_idx = rng.permutation(pos_idx)
    neg_idx = rng.permutation(neg_idx)
    parts = []
    pp = np.cumsum([0] + pos_sizes)
    nn = np.cumsum([0] + neg_sizes)
    names = ("train", "valid", "test")
    for i in range(3):
        idx = np.sort(np.concatenate([pos_idx[pp[i]:pp[i + 1]], neg_idx[nn[i]:nn[i + 1]]]))
        parts.append(dataset.take(idx, tag=f"split:{names[i]}"))
    return tuple(parts)
