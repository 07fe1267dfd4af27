"""Evaluation metrics: thresholded classification scores, histogram mutual
information, leakage audits, and intervention correction accounting.

Entropy and MI are computed on equal-width histograms over [0, 1]: a value v
lands in bin min(floor(v * B), B - 1). Binary variables use B = 2, everything
else defaults to B = 10. MI is in bits (log base 2) and empty cells contribute
zero. Label MI is reported normalized by H(y_true), defined as 0 when the
label entropy is 0.
"""

from __future__ import annotations

import numpy as np

DEFAULT_BINS = 10


def threshold(probs: np.ndarray, thr: float = 0.5) -> np.ndarray:
    """Ties go to the positive class."""
    return (np.asarray(probs) >= thr).astype(int)


def classification_report(y_true: np.ndarray, y_pred: np.ndarray) -> dict:
    """Accuracy / precision / recall / f1; zero-denominator scores are 0 and
    listed under "undefined" instead of raising or returning NaN."""
    y_true = np.asarray(y_true).astype(int)
    y_pred = np.asarray(y_pred).astype(int)
    tp = int(((y_true == 1) & (y_pred == 1)).sum())
    fp = int(((y_true == 0) & (y_pred == 1)).sum())
    fn = int(((y_true == 1) & (y_pred == 0)).sum())
    undefined = []
    precision = recall = f1 = 0.0
    if tp + fp > 0:
        precision = tp / (tp + fp)
    else:
        undefined.append("precision")
    if tp + fn > 0:
        recall = tp / (tp + fn)
    else:
        undefined.append("recall")
    if precision + recall > 0:
        f1 = 2 * precision * recall / (precision + recall)
    else:
        undefined.append("f1")
    return {
        "accuracy": float((y_true == y_pred).mean()),
        "precision": precision, "recall": recall, "f1": f1,
        "undefined": undefined,
    }


def auc_score(y_true: np.ndarray, scores: np.ndarray):
    """Rank-based AUC with midranks for ties. Returns (auc, defined); a
    single-class sample yields (0.5, False)."""
    y_true = np.asarray(y_true).astype(int)
    scores = np.asarray(scores, dtype=np.float64)
    n_pos = int((y_true == 1).sum())
    n_neg = int((y_true == 0).sum())
    if n_pos == 0 or n_neg == 0:
        return 0.5, False
    order = np.argsort(scores, kind="mergesort")
    ranks = np.empty(len(scores))
    sorted_scores = scores[order]
    i = 0
    while i < len(scores):
        j = i
        while j + 1 < len(scores) and sorted_scores[j + 1] == sorted_scores[i]:
            j += 1
        ranks[order[i:j + 1]] = (i + j) / 2.0 + 1.0
        i = j + 1
    rank_sum = ranks[y_true == 1].sum()
    return float((rank_sum - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg)), True


def is_binary(values: np.ndarray) -> bool:
    v = np.asarray(values)
    return bool(np.isin(v, (0.0, 1.0)).all())


def discretize(values: np.ndarray, bins: int) -> np.ndarray:
    v = np.asarray(values, dtype=np.float64)
    return np.clip(np.floor(v * bins).astype(int), 0, bins - 1)


def _auto_bins(values: np.ndarray, bins: int | None) -> int:
    if bins is not None:
        return bins
    return 2 if is_binary(values) else DEFAULT_BINS


def entropy(values: np.ndarray, bins: int | None = None) -> float:
    """Shannon entropy in bits of the histogram distribution."""
    b = _auto_bins(values, bins)
    counts = np.bincount(discretize(values, b), minlength=b)
    p = counts[counts > 0] / counts.sum()
    return float(-(p * np.log2(p)).sum())


def mutual_information(a: np.ndarray, b: np.ndarray,
                       bins_a: int | None = None,
                       bins_b: int | None = None) -> float:
    """I(a; b) in bits over the joint histogram; zero-count cells add 0."""
    ba = _auto_bins(a, bins_a)
    bb = _auto_bins(b, bins_b)
    ia = discretize(a, ba)
    ib = discretize(b, bb)
    joint = np.bincount(ia * bb + ib, minlength=ba * bb).reshape(ba, bb)
    n = joint.sum()
    pj = joint / n
    pa = pj.sum(axis=1)
    pb = pj.sum(axis=0)
    mask = pj > 0
    denom = np.outer(pa, pb)
    return float((pj[mask] * np.log2(pj[mask] / denom[mask])).sum())


def normalized_label_mi(y_true: np.ndarray, y_pred: np.ndarray) -> float:
    """I(y; y_hat) / H(y) over thresholded labels; 0 when H(y) = 0."""
    hy = entropy(np.asarray(y_true, dtype=float), 2)
    if hy == 0.0:
        return 0.0
    return mutual_information(np.asarray(y_true, dtype=float),
                              np.asarray(y_pred, dtype=float), 2, 2) / hy


def concept_task_leakage(c_hat: np.ndarray, c: np.ndarray, y: np.ndarray,
                         bins: int | None = None) -> np.ndarray:
    """Per-concept CTL: surplus label information in the predicted concept
    over its ground truth, max(0, I(c_hat_i; y) - I(c_i; y)) / H(y).
    Always in [0, 1]; zero when predictions equal ground truth."""
    c_hat = np.atleast_2d(c_hat)
    c = np.atleast_2d(c)
    y = np.asarray(y, dtype=float)
    hy = entropy(y, 2)
    k = c_hat.shape[1]
    if hy == 0.0:
        return np.zeros(k)
    out = np.empty(k)
    for i in range(k):
        gain = mutual_information(c_hat[:, i], y, bins, 2) - \
            mutual_information(c[:, i], y, bins, 2)
        out[i] = max(0.0, gain / hy)
    return out


def _normalized_pair_mi(a: np.ndarray, b: np.ndarray, bins: int | None) -> float:
    ha = entropy(a, _auto_bins(a, bins))
    hb = entropy(b, _auto_bins(b, bins))
    if ha == 0.0 or hb == 0.0:
        return 0.0
    return mutual_information(a, b, bins, bins) / np.sqrt(ha * hb)


def inter_concept_leakage(c_hat: np.ndarray, c: np.ndarray,
                          bins: int | None = None) -> np.ndarray:
    """Pairwise ICL matrix: surplus normalized MI between predicted concepts
    over the same quantity between ground-truth concepts, clipped at 0.
    Symmetric, zero diagonal, entries in [0, 1]."""
    c_hat = np.atleast_2d(c_hat)
    c = np.atleast_2d(c)
    k = c_hat.shape[1]
    out = np.zeros((k, k))
    for i in range(k):
        for j in range(i + 1, k):
            surplus = _normalized_pair_mi(c_hat[:, i], c_hat[:, j], bins) - \
                _normalized_pair_mi(c[:, i], c[:, j], bins)
            out[i, j] = out[j, i] = max(0.0, surplus)
    return out


def evaluate_predictions(y_true: np.ndarray, probs: np.ndarray,
                         thr: float = 0.5) -> dict:
    y_pred = threshold(probs, thr)
    rep = classification_report(y_true, y_pred)
    auc, auc_defined = auc_score(y_true, probs)
    rep["auc"] = auc
    rep["auc_defined"] = auc_defined
    if not auc_defined:
        rep["undefined"].append("auc")
    rep["normalized_mi"] = normalized_label_mi(y_true, y_pred)
    return rep


def concept_mae(c_hat: np.ndarray, c: np.ndarray) -> np.ndarray:
    return np.abs(np.atleast_2d(c_hat) - np.atleast_2d(c)).mean(axis=0)


def correction_report(y_true: np.ndarray, probs_pre: np.ndarray,
                      probs_post: np.ndarray, thr: float = 0.5) -> dict:
    """How an intervention moved thresholded predictions: corrected false
    negatives/positives and newly introduced errors."""
    y = np.asarray(y_true).astype(int)
    pre = threshold(probs_pre, thr)
    post = threshold(probs_post, thr)
    fn_mask = (y == 1) & (pre == 0)
    fp_mask = (y == 0) & (pre == 1)
    return {
        "fn_total": int(fn_mask.sum()),
        "fn_corrected": int((fn_mask & (post == 1)).sum()),
        "new_fp": int(((y == 0) & (pre == 0) & (post == 1)).sum()),
        "fp_total": int(fp_mask.sum()),
        "fp_corrected": int((fp_mask & (post == 0)).sum()),
        "new_fn": int(((y == 1) & (pre == 1) & (post == 0)).sum()),
        "accuracy_pre": float((pre == y).mean()),
        "accuracy_post": float((post == y).mean()),
    }


def select_top_concepts(scores: dict[str, float], q: int, order) -> list[str]:
    """Top q concept names by score, ties broken by schema order; q larger
    than the candidate set returns everything."""
    order = list(order)
    ranked = sorted(scores, key=lambda n: (-scores[n], order.index(n)))
    return ranked[:max(0, q)]
