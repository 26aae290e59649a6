"""cgec_kit: native Chinese grammatical error correction toolkit.

Covers the offline data pipeline (clue-rule synthesis, LLM-assisted
generation, error-invariant augmentation, instruction-record emission) and a
word/char-level MaxMatch scorer producing Precision, Recall and F0.5.
"""

from .augment import (
    AugmentationPlan,
    EntityLexicon,
    SubstitutableEntity,
    augment_corpus,
    augment_pair,
    find_substitutable_spans,
)
from .corpus import (
    ClueClass,
    DatasetStats,
    ErrorType,
    PairSource,
    ParallelPair,
    compute_stats,
    format_stats,
    load_pairs,
    save_pairs,
    validate_pair_set,
)
from .edits import (
    CHAR,
    WORD,
    Edit,
    Granularity,
    Token,
    align,
    apply_edits,
    extract_edits,
    load_lexicon,
    segment,
)
from .errors import (
    AuthenticationError,
    CgecError,
    ConfigurationError,
    InputFormatError,
    TransportError,
    ValidationError,
)
from .instructions import (
    DEFAULT_LAYOUT,
    DEFAULT_TASK_DESCRIPTION,
    DEFAULT_TASK_PREFIX,
    InstructionRecord,
    InstructionTemplate,
    emit_dataset,
    render_instruction,
    render_text,
)
from .llm import (
    GenerationRequest,
    GenerationResult,
    cached_generate,
    complete_chat,
    generate_many,
    parse_sentences,
    validate_generated,
)
from .scorer import (
    GoldAnnotation,
    ScoreReport,
    SentenceScore,
    annotate_corpus,
    f_beta,
    format_report,
    match_edits,
    read_m2,
    score_corpus,
    select_reference,
    write_m2,
)
from .synthesis import (
    DEFAULT_PROMPT_TEMPLATE,
    STARTER_CLUES,
    STARTER_RULES,
    CluePrompt,
    ClueRule,
    apply_rule,
    build_prompt,
    corrupt_once,
    find_rule_for_clues,
    load_rules,
    load_sentences,
    repair_once,
    synthesize_corpus,
)

__version__ = "0.1.0"
