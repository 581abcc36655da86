"""Joint longitudinal/survival datasets and their CSV representation.

Two tables describe a dataset:

* survival table: one row per subject with ``subject_id``, ``status``
  (``exact``, ``right``, ``left`` or ``interval``), ``time`` (or
  ``t_left`` / ``t_right`` for interval censoring), ``cause`` and any
  subject-level covariates;
* longitudinal table: one row per measurement with ``subject_id``,
  ``time`` and the outcome column (default ``outcome``).
"""

from __future__ import annotations

import hashlib
import io
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import pandas as pd

from .errors import ValidationError
from .ghsurv import STATUS_CODES

SURVIVAL_FILE = "survival.csv"
LONGITUDINAL_FILE = "longitudinal.csv"
_RESERVED = ("subject_id", "time", "t_left", "t_right", "status", "cause")


@dataclass
class JointDataset:
    subjects: pd.DataFrame
    longitudinal: pd.DataFrame
    outcome: str = "outcome"

    def __post_init__(self):
        self.subjects = self.subjects.reset_index(drop=True).copy()
        self.longitudinal = self.longitudinal.reset_index(drop=True).copy()
        for col in ("t_left", "t_right", "time"):
            if col not in self.subjects:
                self.subjects[col] = np.nan
        if "cause" not in self.subjects:
            self.subjects["cause"] = ""
        self.subjects["subject_id"] = self.subjects["subject_id"].astype(str)
        self.subjects["cause"] = self.subjects["cause"].fillna("").astype(str)
        self.longitudinal["subject_id"] = self.longitudinal["subject_id"].astype(str)
        self.validate()

    @property
    def n_subjects(self) -> int:
        return len(self.subjects)

    @property
    def covariate_columns(self) -> list[str]:
        return [c for c in self.subjects.columns if c not in _RESERVED]

    def validate(self) -> None:
        s, lg = self.subjects, self.longitudinal
        for col in ("subject_id", "status"):
            if col not in s:
                raise ValidationError(f"survival table lacks required column {col!r}")
        for col in ("subject_id", "time", self.outcome):
            if col not in lg:
                raise ValidationError(f"longitudinal table lacks required column {col!r}")
        dup = s["subject_id"][s["subject_id"].duplicated()]
        if len(dup):
            raise ValidationError(f"duplicate subject ids in survival table: {sorted(set(dup))[:5]}")
        bad = sorted(set(s["status"]) - set(STATUS_CODES))
        if bad:
            raise ValidationError(f"unknown status values {bad}; expected {list(STATUS_CODES)}")
        is_int = s["status"] == "interval"
        t = s["time"].to_numpy(float)
        tl, tr = s["t_left"].to_numpy(float), s["t_right"].to_numpy(float)
        if np.any(~(t[~is_int] > 0)):
            raise ValidationError("event/censoring times must be > 0")
        if np.any(~((tl[is_int] > 0) & (tl[is_int] < tr[is_int]))):
            raise ValidationError("interval-censored rows need 0 < t_left < t_right")
        unknown = sorted(set(lg["subject_id"]) - set(s["subject_id"]))
        if unknown:
            raise ValidationError(f"longitudinal rows for unknown subjects {unknown[:5]}")
        lt = lg["time"].to_numpy(float)
        if np.any(~(lt >= 0)):
            raise ValidationError("longitudinal times must be >= 0")
        if np.any(~np.isfinite(lg[self.outcome].to_numpy(float))):
            raise ValidationError("non-finite longitudinal outcomes")
        end = pd.Series(np.where(is_int, tr, t), index=s["subject_id"])
        limit = end.reindex(lg["subject_id"]).to_numpy()
        if np.any(lt > limit * (1 + 1e-12)):
            raise ValidationError("longitudinal times exceed the subject's event/censoring time")

    def subset(self, subject_ids) -> "JointDataset":
        ids = [str(i) for i in subject_ids]
        s = self.subjects.set_index("subject_id").loc[ids].reset_index()
        lg = self.longitudinal[self.longitudinal["subject_id"].isin(ids)]
        return JointDataset(s, lg, self.outcome)

    def obs_by_subject(self) -> dict:
        return {k: g for k, g in self.longitudinal.groupby("subject_id", sort=False)}

    # ------------------------------------------------------------------ io
    def _csv_bytes(self):
        buf_s, buf_l = io.StringIO(), io.StringIO()
        self.subjects.to_csv(buf_s, index=False, float_format="%.17g", lineterminator="\r\n")
        self.longitudinal.to_csv(buf_l, index=False, float_format="%.17g", lineterminator="\r\n")
        return buf_s.getvalue().encode("utf-8"), buf_l.getvalue().encode("utf-8")

    def content_hash(self) -> str:
        s, lg = self._csv_bytes()
        return hashlib.sha256(s + b"\x00" + lg).hexdigest()

    def to_csv(self, out_dir) -> tuple[Path, Path]:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        s, lg = self._csv_bytes()
        (out / SURVIVAL_FILE).write_bytes(s)
        (out / LONGITUDINAL_FILE).write_bytes(lg)
        return out / SURVIVAL_FILE, out / LONGITUDINAL_FILE

    @classmethod
    def from_csv(cls, survival_path, longitudinal_path, outcome: str = "outcome") -> "JointDataset":
        try:
            s = pd.read_csv(survival_path, dtype={"subject_id": str, "cause": str, "status": str},
                            keep_default_na=False, na_values=[""], float_precision="round_trip")
            lg = pd.read_csv(longitudinal_path, dtype={"subject_id": str}, float_precision="round_trip")
        except (OSError, pd.errors.ParserError) as exc:
            raise ValidationError(f"could not read dataset: {exc}") from exc
        return cls(s, lg, outcome)

    @classmethod
    def from_dir(cls, path, outcome: str = "outcome") -> "JointDataset":
        p = Path(path)
        return cls.from_csv(p / SURVIVAL_FILE, p / LONGITUDINAL_FILE, outcome)
