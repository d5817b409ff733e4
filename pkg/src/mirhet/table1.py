"""Cross-consistency of the tabulated detector figures of merit.

Every preset row is checked against the closed forms it should satisfy:
R vs eta g e lambda / (h c), linear NEP vs sqrt(A_e)/D*, and the
shot-noise heterodyne NEP vs e g / (2R) and h nu / (2 eta). Known
inconsistencies in the tabulated values are reported as ``expected-fail``
with a note, not hidden.
"""

from dataclasses import asdict, dataclass

from .budget import nep_shot_limit, nep_shot_limit_eta
from .detectors import PRESET_NAMES, nep_from_dstar, preset

STRICT = 0.05

# (detector, check) -> note for discrepancies that are in the source values
KNOWN = {
    ("QCD", "responsivity"): "tabulated R is 2.0x eta*g*e*lambda/(h*c)",
    ("QCD", "linear_nep"): "tabulated linear NEP is ~90x sqrt(A_e)/D*",
    ("QCD", "nep_h_sn_eg"): "tabulated NEP_h-SN lies between the two closed forms",
    ("QCD", "nep_h_sn_eta"): "tabulated NEP_h-SN lies between the two closed forms",
    ("QWIP", "nep_h_sn_eg"): "tabulated NEP_h-SN is 2.0x the closed form",
    ("QWIP", "nep_h_sn_eta"): "tabulated NEP_h-SN is 2.0x the closed form",
}


@dataclass(frozen=True)
class Check:
    detector: str
    check: str
    table: float
    computed: float
    tolerance: float  # relative
    status: str  # pass | expected-fail | fail
    note: str = ""

    @property
    def ratio(self):
        return self.table / self.computed

    @property
    def rel_error(self):
        return abs(self.table - self.computed) / abs(self.table)

    def as_dict(self):
        d = asdict(self)
        d["ratio"] = self.ratio
        d["rel_error"] = self.rel_error
        return d


def _check(name, what, table, computed, tol):
    err = abs(table - computed) / abs(table)
    if err <= tol:
        status, note = "pass", ""
    elif (name, what) in KNOWN:
        status, note = "expected-fail", KNOWN[(name, what)]
    else:
        status, note = "fail", ""
    return Check(name, what, float(table), float(computed), tol, status, note)


def validate_table1(names=PRESET_NAMES):
    out = []
    for name in names:
        d = preset(name)
        out.append(_check(name, "responsivity", d.R, d.r_from_physics,
                          d.r_tolerance if d.r_tolerance < 0.5 else STRICT))
        if d.linear_nep is not None:
            out.append(_check(name, "linear_nep", d.linear_nep, nep_from_dstar(d.D_star, d.A_e), 0.10))
        if d.nep_h_sn is not None:
            out.append(_check(name, "nep_h_sn_eg", d.nep_h_sn, nep_shot_limit(d), STRICT))
            out.append(_check(name, "nep_h_sn_eta", d.nep_h_sn, nep_shot_limit_eta(d), STRICT))
    return out


def summary_line(c: Check):
    return (f"{c.detector:5s} {c.check:13s} table={c.table:.3e} computed={c.computed:.3e} "
            f"ratio={c.ratio:.3f} tol={c.tolerance:.0%} {c.status.upper()}"
            + (f"  ({c.note})" if c.note else ""))
