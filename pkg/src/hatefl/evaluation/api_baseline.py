from __future__ import annotations

from collections.abc import Sequence

from hatefl.data import LabeledExample
from hatefl.evaluation.metrics import macro_f1
from hatefl.evaluation.thresholds import ThresholdTable, classify_toxicity, threshold_table
from hatefl.evaluation.toxicity import ToxicityClient
from hatefl.runreport import RunReport, SeedScores


def evaluate_api_baseline(
    tests: dict[str, Sequence[LabeledExample]],
    client: ToxicityClient,
    *,
    config_digest: str,
    rounds: int = 0,
) -> tuple[list[RunReport], ThresholdTable]:
    """Score every test sentence once, then classify at each configured threshold.

    Returns one report per threshold (a single deterministic "seed") and the
    profanity breakdown over the pooled test data.
    """
    scores = {cid: client.score_many([ex.text for ex in exs]) for cid, exs in sorted(tests.items())}
    reports = []
    thresholds = client.cfg.thresholds
    for t in thresholds:
        per_client = {}
        gold_all: list[int] = []
        pred_all: list[int] = []
        for cid, exs in sorted(tests.items()):
            gold = [int(ex.label) for ex in exs]
            pred = [int(classify_toxicity(s, t)) for s in scores[cid]]
            per_client[cid] = SeedScores([macro_f1(gold, pred).macro_f1])
            gold_all += gold
            pred_all += pred
        reports.append(RunReport(
            mode="api", strategy="toxicity_api", seeds=[0], rounds=rounds, config_digest=config_digest,
            per_client=per_client, server=SeedScores([macro_f1(gold_all, pred_all).macro_f1]),
            shots=None, threshold=t,
        ))
    pooled = [(ex.label, ex.profanity) for _, exs in sorted(tests.items()) for ex in exs]
    pooled_scores = [s for cid in sorted(tests) for s in scores[cid]]
    return reports, threshold_table(pooled, pooled_scores, thresholds)
