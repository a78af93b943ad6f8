"""Metadata-first MapReduce joins on an in-process engine with exact bit accounting."""
from .bounds import BoundError, theorem_bound
from .engine import (CHANNELS, Cluster, CostLedger, DigestCollision, HashExhausted, JobPlan,
                     JobResult, PlanError, Round, Topology, call_fetch, run_hierarchical,
                     run_job, run_round)
from .hashing import HashConfig, digest, rehash, required_digest_bits
from .joins import (JoinSpec, equijoin_classic, equijoin_meta, find_dominating_attrs,
                    hashed_join_meta, hierarchical_equijoin, measure, multiway_join_meta,
                    skew_join_meta)
from .knn import ParameterError, knn_meta
from .model import (AttributeValue, CostModel, Digest, IntegrityError, Literal, MetaRecord,
                    Origin, Relation, SchemaError, Site, Tuple, UserIndex, build_index,
                    load_relation, dump_relation, make_meta)
from .report import CostReport, emit_report
from .schema import (MappingSchema, OversizedGroup, SchemaInfeasible, bin_pack_assign,
                     key_group_assign, skew_assign, validate_schema)
from .socialgraph import GraphError, SocialGraph, shortest_path_meta
from .workloads import GenerationError, GenSpec, gen_relations

__version__ = "0.1.0"
