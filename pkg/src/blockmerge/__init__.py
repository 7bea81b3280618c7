"""Local-first collaborative editing of block-structured documents with
embedded computed values: high-level structure edits, order-insensitive
merging of concurrent edit logs, and formula rewriting through structural
refactorings."""

from .model import (
    Document,
    Node,
    NodeId,
    NodeKind,
    create_document,
    find,
    render,
    structurally_equal,
)
from .ops import EditLog, EditOp, LogEntry
from .edits import apply_edit, expand_refactor_list_to_table, validate
from .selectors import Selector, parse_selector, resolve, rewrite_selector
from .formulas import eval_formula, parse_formula, print_formula, dependencies
from .recompute import dirty_set, recompute
from .merge import (
    Conflict,
    MergeOutcome,
    PolicyResolver,
    Resolution,
    merge,
    merge_interactive,
    transform,
)
from .persistence import (
    load_document,
    load_log,
    replay,
    save_document,
    save_log,
    version_hash,
)

__all__ = [
    "Conflict",
    "Document",
    "EditLog",
    "EditOp",
    "LogEntry",
    "MergeOutcome",
    "Node",
    "NodeId",
    "NodeKind",
    "PolicyResolver",
    "Resolution",
    "Selector",
    "apply_edit",
    "create_document",
    "dependencies",
    "dirty_set",
    "eval_formula",
    "expand_refactor_list_to_table",
    "find",
    "load_document",
    "load_log",
    "merge",
    "merge_interactive",
    "parse_formula",
    "parse_selector",
    "print_formula",
    "recompute",
    "render",
    "replay",
    "resolve",
    "rewrite_selector",
    "save_document",
    "save_log",
    "structurally_equal",
    "transform",
    "validate",
    "version_hash",
]
