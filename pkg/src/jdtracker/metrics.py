"""CLEAR and HOTA evaluation for desk-scale self-checks.

Matching is class-aware (cross-class similarity is zero) and uses 3D IoU by
default. MOTP is reported as mean similarity over matches, so higher is
better; the text report says so explicitly. HOTA follows the standard
double-pass formulation: a global alignment score from potential matches
guides per-frame assignment, evaluated at 19 thresholds alpha = 0.05..0.95.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import linear_sum_assignment

from .geometry import Box3D, iou_2d, iou_3d, iou_bev, project_box

HOTA_ALPHAS = np.arange(0.05, 0.96, 0.05)
_BIG = 1e9


def similarity_fn(name: str, calib=None):
    if name == "iou_3d":
        return iou_3d
    if name == "iou_bev":
        return iou_bev
    if name == "iou_2d":
        if calib is None:
            raise ValueError("iou_2d similarity needs a camera calibration")

        def f(a: Box3D, b: Box3D) -> float:
            pa, pb = project_box(a, calib), project_box(b, calib)
            return iou_2d(pa, pb) if pa is not None and pb is not None else 0.0
        return f
    raise ValueError(f"unknown similarity {name!r}")


@dataclass
class ClearMetrics:
    mota: float
    motp: float
    fp: int
    fn: int
    idsw: int
    num_gt: int
    tp: int


@dataclass
class HotaMetrics:
    hota: float
    deta: float
    assa: float
    per_alpha: dict = field(default_factory=dict)


@dataclass
class ClassReport:
    clear: ClearMetrics
    hota: HotaMetrics


@dataclass
class EvalReport:
    per_class: dict[str, ClassReport]
    overall: ClassReport

    def to_text(self) -> str:
        lines = ["MOTP is mean matched similarity (higher is better)",
                 f"{'class':<12}{'MOTA':>8}{'MOTP':>8}{'FP':>6}{'FN':>6}"
                 f"{'IDSW':>6}{'HOTA':>8}{'DetA':>8}{'AssA':>8}"]
        rows = list(self.per_class.items()) + [("overall", self.overall)]
        for name, rep in rows:
            c, h = rep.clear, rep.hota
            lines.append(f"{name:<12}{c.mota:>8.4f}{c.motp:>8.4f}{c.fp:>6d}{c.fn:>6d}"
                         f"{c.idsw:>6d}{h.hota:>8.4f}{h.deta:>8.4f}{h.assa:>8.4f}")
        return "\n".join(lines) + "\n"

    def to_json(self) -> str:
        def encode(rep: ClassReport) -> dict:
            return {
                "mota": rep.clear.mota, "motp": rep.clear.motp,
                "fp": rep.clear.fp, "fn": rep.clear.fn, "idsw": rep.clear.idsw,
                "num_gt": rep.clear.num_gt, "tp": rep.clear.tp,
                "hota": rep.hota.hota, "deta": rep.hota.deta, "assa": rep.hota.assa,
                "hota_per_alpha": {f"{a:.2f}": v for a, v in rep.hota.per_alpha.items()},
            }
        payload = {name: encode(rep) for name, rep in self.per_class.items()}
        payload["overall"] = encode(self.overall)
        return json.dumps(payload, indent=2, sort_keys=True)


def _by_frame(rows) -> dict[int, list]:
    out: dict[int, list] = {}
    for r in rows:
        out.setdefault(r.frame, []).append(r)
    return out


def _sim_matrix(gts, preds, similarity) -> np.ndarray:
    sim = np.zeros((len(gts), len(preds)))
    for i, g in enumerate(gts):
        for j, p in enumerate(preds):
            if g.class_label == p.class_label:
                sim[i, j] = similarity(g.box, p.box)
    return sim


def match_frame(sim: np.ndarray, threshold: float,
                carry: list[tuple[int, int]] = ()) -> list[tuple[int, int]]:
    """Optimal bipartite matching among pairs at or above the threshold.

    ``carry`` pairs (CLEAR continuity) are locked in first whenever still
    valid; the remainder is assigned to maximize total similarity.
    """
    n_gt, n_pred = sim.shape
    matches = []
    used_g, used_p = set(), set()
    for gi, pj in carry:
        if gi < n_gt and pj < n_pred and gi not in used_g and pj not in used_p \
                and sim[gi, pj] >= threshold:
            matches.append((gi, pj))
            used_g.add(gi)
            used_p.add(pj)
    free_g = [i for i in range(n_gt) if i not in used_g]
    free_p = [j for j in range(n_pred) if j not in used_p]
    if free_g and free_p:
        cost = np.full((len(free_g), len(free_p)), _BIG)
        for a, gi in enumerate(free_g):
            for b, pj in enumerate(free_p):
                if sim[gi, pj] >= threshold:
                    cost[a, b] = -sim[gi, pj]
        rows, cols = linear_sum_assignment(cost)
        for a, b in zip(rows, cols):
            if cost[a, b] < 0:
                matches.append((free_g[a], free_p[b]))
    return sorted(matches)


def evaluate_clear(gt_rows, pred_rows, threshold: float = 0.25,
                   similarity=iou_3d) -> ClearMetrics:
    """MOTA/MOTP/FP/FN/IDSW with the standard continuity-then-assign matching."""
    gt_frames = _by_frame(gt_rows)
    pred_frames = _by_frame(pred_rows)
    frames = sorted(set(gt_frames) | set(pred_frames))
    fp = fn = idsw = tp = 0
    sim_total = 0.0
    prev_pair: dict = {}      # gt id -> track id matched in the previous frame
    last_match: dict = {}     # gt id -> track id at its most recent match
    for f in frames:
        gts = gt_frames.get(f, [])
        preds = pred_frames.get(f, [])
        sim = _sim_matrix(gts, preds, similarity)
        gid = [g.track_id for g in gts]
        pid = [p.track_id for p in preds]
        carry = []
        for i, g in enumerate(gid):
            if g in prev_pair and prev_pair[g] in pid:
                carry.append((i, pid.index(prev_pair[g])))
        matches = match_frame(sim, threshold, carry)
        tp += len(matches)
        fn += len(gts) - len(matches)
        fp += len(preds) - len(matches)
        new_pairs = {}
        for gi, pj in matches:
            sim_total += sim[gi, pj]
            g, p = gid[gi], pid[pj]
            if g in last_match and last_match[g] != p:
                idsw += 1
            last_match[g] = p
            new_pairs[g] = p
        prev_pair = new_pairs
    num_gt = len(gt_rows)
    mota = 1.0 - (fn + fp + idsw) / max(num_gt, 1)
    motp = sim_total / tp if tp else 0.0
    return ClearMetrics(mota, motp, fp, fn, idsw, num_gt, tp)


def evaluate_hota(gt_rows, pred_rows, similarity=iou_3d) -> HotaMetrics:
    """HOTA(alpha) = sqrt(DetA * AssA) averaged over 19 alpha levels."""
    gt_frames = _by_frame(gt_rows)
    pred_frames = _by_frame(pred_rows)
    frames = sorted(set(gt_frames) | set(pred_frames))
    gt_ids = sorted({r.track_id for r in gt_rows})
    pr_ids = sorted({r.track_id for r in pred_rows})
    g_index = {g: i for i, g in enumerate(gt_ids)}
    p_index = {p: j for j, p in enumerate(pr_ids)}
    n_g, n_p = len(gt_ids), len(pr_ids)
    if n_g == 0 and n_p == 0:
        return HotaMetrics(1.0, 1.0, 1.0,
                           {float(a): (1.0, 1.0, 1.0) for a in HOTA_ALPHAS})

    per_frame = []
    potential = np.zeros((n_g, n_p))
    gt_count = np.zeros(n_g)
    pr_count = np.zeros(n_p)
    for f in frames:
        gts = gt_frames.get(f, [])
        preds = pred_frames.get(f, [])
        sim = _sim_matrix(gts, preds, similarity)
        gi = np.array([g_index[g.track_id] for g in gts], dtype=int)
        pj = np.array([p_index[p.track_id] for p in preds], dtype=int)
        per_frame.append((gi, pj, sim))
        for i in gi:
            gt_count[i] += 1
        for j in pj:
            pr_count[j] += 1
        if len(gts) and len(preds):
            denom = sim.sum(0)[None, :] + sim.sum(1)[:, None] - sim
            frac = np.divide(sim, denom, out=np.zeros_like(sim), where=denom > 1e-12)
            potential[np.ix_(gi, pj)] += frac

    denom = gt_count[:, None] + pr_count[None, :] - potential
    alignment = np.divide(potential, denom, out=np.zeros_like(potential), where=denom > 1e-12)

    per_alpha = {}
    hotas, detas, assas = [], [], []
    for alpha in HOTA_ALPHAS:
        tp = fn = fp = 0
        matches = np.zeros((n_g, n_p))
        for gi, pj, sim in per_frame:
            if len(gi) and len(pj):
                score = alignment[np.ix_(gi, pj)] * sim
                rows, cols = linear_sum_assignment(-score)
                ok = sim[rows, cols] >= alpha - 1e-12
                rows, cols = rows[ok], cols[ok]
                tp += len(rows)
                fn += len(gi) - len(rows)
                fp += len(pj) - len(rows)
                matches[gi[rows], pj[cols]] += 1
            else:
                fn += len(gi)
                fp += len(pj)
        if tp + fn + fp == 0:
            deta = assa = hota = 1.0
        else:
            deta = tp / (tp + fn + fp)
            if tp:
                pair_denom = gt_count[:, None] + pr_count[None, :] - matches
                ass = np.divide(matches, pair_denom, out=np.zeros_like(matches),
                                where=pair_denom > 1e-12)
                assa = float((matches * ass).sum() / tp)
            else:
                assa = 0.0
            hota = float(np.sqrt(deta * assa))
        per_alpha[float(alpha)] = (hota, deta, assa)
        hotas.append(hota)
        detas.append(deta)
        assas.append(assa)
    return HotaMetrics(float(np.mean(hotas)), float(np.mean(detas)),
                       float(np.mean(assas)), per_alpha)


def evaluate(gt_rows, pred_rows, threshold: float = 0.25,
             similarity=iou_3d) -> EvalReport:
    """Per-class and pooled CLEAR + HOTA."""
    classes = sorted({r.class_label for r in gt_rows} | {r.class_label for r in pred_rows})
    per_class = {}
    for cls in classes:
        g = [r for r in gt_rows if r.class_label == cls]
        p = [r for r in pred_rows if r.class_label == cls]
        per_class[cls] = ClassReport(evaluate_clear(g, p, threshold, similarity),
                                     evaluate_hota(g, p, similarity))
    overall = ClassReport(evaluate_clear(gt_rows, pred_rows, threshold, similarity),
                          evaluate_hota(gt_rows, pred_rows, similarity))
    return EvalReport(per_class, overall)
