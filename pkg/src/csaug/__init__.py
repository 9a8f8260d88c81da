"""Code-switched data augmentation for TOP semantic parsing."""

from .aligner import AlignedRecord, align_corpus, reconstruct_parse
from .genclient import GenerationRecord, GenerationRequest, generate_batch, mock_generate
from .marker import MarkedUtterance, export_seed_pairs, mark_utterance, strip_marks
from .spanfilter import Rule, ThroughputReport, ValidationVerdict, extract_spans, filter_corpus, validate_pair
from .stats import CorpusStats, LexiconTagger, corpus_stats, cs_points, tag_tokens
from .top import ParseNode, ParseTree, Utterance, exact_match, leaf_nodes, parse_top, serialize

__version__ = "0.1.0"
