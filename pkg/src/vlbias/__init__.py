"""Gender bias auditing for vision-language corpora and model predictions.

The pipeline labels images and texts with a gender lexicon, rewrites text to
gender-neutral form, counts group/noun co-occurrences, and scores model
predictions with directional bias amplification and per-group disparity.
"""

__version__ = "0.1.0"

from .annotate import LabeledExample, LabelSummary, label_corpus, label_image, label_single_text
from .cooccur import CooccurrenceMatrix, build_matrix, merge, select_targets
from .errors import (
    DataError, DomainError, LexiconError, MetricError, ParseError, SchemaError, ShapeError,
    UnsupportedTaskError, VlbiasError,
)
from .kernels import BACKEND
from .labels import DiscardReason, GenderLabel, Verdict
from .lexicon import (
    GenderLexicon, TargetNounList, classify_token, dump_lexicon, load_lexicon, load_targets,
    neutral_target,
)
from .metrics import (
    BiasAmpResult, Direction, EventTable, biasamp, delta_at, filter_vqa_answers,
    group_disparity, group_scores_mlm, mlm_gender_of_prediction, retrieval_distribution,
    vqa_bias_table, y_indicator,
)
from .report import AuditReport, cmd_extrinsic, cmd_intrinsic, render
from .rewrite import ScheduleConfig, mask_text, rewrite_text, sample_stream, schedule_p
