"""Link traversal query processing with shape-index source selection."""
from .containment import (Binding, BindingOutcome, ContainmentReport, Mode, ReachabilityDecision,
                          bind_star_to_shape, decide_adaptation, solve_containment)
from .engine import ReachabilityMode, TraversalEngine, TraversalMetrics, admit_link, execute, extract_links
from .netsim import (DocumentNetwork, NetworkParams, check_network, generate_network, load_fixture,
                     save_fixture)
from .query import (SelectQuery, StarDecomposition, StarPattern, TriplePattern, decompose_stars,
                    evaluate, evaluate_bgp, parse_select)
from .rdf import SourcedStore, Term, Triple, iri, literal, match_pattern, parse_ntriples, serialize_ntriples, var
from .shapes import (PredicateConstraint, Shape, ShapeIndex, ShapeIndexEntry, parse_shape_index, parse_shapes,
                     shape_to_query, validate_document)

__version__ = "0.1.0"
