"""schemakit: change a schema and everything built on it survives.

A schema here is anything that constrains shape: a declared structural
type, a keyed table layout, or the implicit structure of a tree document.
Each module owns one co-evolution problem and exposes pure functions over
immutable values:

- types     structural types, conformance, path-addressed edits, diffing
- migrate   data migration plans derived from type edits; handler reconcile
- database  keyed tables with typed, optionally referencing columns
- entity    extract/absorb/merge/split entities, with correspondences
- query     SQL-subset parse/print/eval and rewriting through extraction
- doc       attributed trees, authored edit logs, commutative merge
- formula   path formulas over documents: eval, rewrite, invalidation
- lens      bidirectional transforms: extract lens, multiplicity lens
- machine   a tiny state-machine DSL whose instances survive patching
- cli       the `schemakit` executable binding it all together

The recurring shape: an edit to the schema side produces (a) the new
schema, (b) a derived transformation for existing data, and (c) rewrites
or todo items for the code that consumed the old shape. Anything that
cannot be done silently is surfaced -- as a needs-input error in batch, a
prompt in interactive mode, or a recorded pending question.
"""

from .database import (
    Column,
    Database,
    DanglingReference,
    IntegrityError,
    Table,
    UnknownId,
    check_integrity,
    db_from_obj,
    db_to_obj,
    insert_row,
    referencing_columns,
    set_cell,
)
from .entity import (
    Correspondence,
    ExtractSpec,
    absorb_entity,
    corr_from_obj,
    corr_to_obj,
    extract_entity,
    merge_entities,
    referencing_rows,
    split_entity,
)
from .errors import NotInteractive, SchemakitError
from .lens import (
    ExtractEntityLens,
    MultiplicityChange,
    MultiplicityLens,
    PolicyRequired,
    Unsupported,
    Untransportable,
    lens_for,
)
from .migrate import (
    CodeTodo,
    MigrationPlan,
    NeedsInput,
    ValueMapping,
    derive_migration,
    migrate_value,
    reconcile_handlers,
)
from .query import (
    CannotRewrite,
    Query,
    ResultSet,
    evaluate_query,
    parse_query,
    print_query,
    rewrite_query,
)
from .types import (
    BOOL,
    DATETIME,
    ID,
    INT,
    NONE,
    STRING,
    AddCase,
    AddField,
    BoolVal,
    ChangeCasePayload,
    ChangeFieldType,
    DateTimeVal,
    IdVal,
    IntVal,
    ListOf,
    ListVal,
    Named,
    NoneVal,
    Option,
    Prim,
    Record,
    RecordVal,
    RemoveCase,
    RemoveField,
    RenameCase,
    RenameDirective,
    RenameField,
    ReplaceType,
    SomeVal,
    StrVal,
    Variant,
    VariantVal,
    apply_type_edit,
    conforms,
    type_diff,
)

__version__ = "0.1.0"
