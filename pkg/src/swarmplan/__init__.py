"""Mission planning and coordination engine for heterogeneous robot swarms."""

from .automaton import (Guard, InfeasibleSpecification, Nba, RPoset,
                        ReachableSet, TaskDag, advance, distance_to_accept,
                        extract_rposet, rposet_to_dag)
from .engine import Engine, RunMetrics, exploration_outcome
from .ltl import (Formula, LassoWord, LtlSyntaxError, UndeclaredProposition,
                  all_lasso_words, fmt, is_co_safe, parse_ltl, satisfies,
                  to_nnf)
from .monitor import (MissionTracker, SyncRule, check_sync, observe, snapshot,
                      verdict)
from .scenario import Scenario, ScenarioError, load_scenario
from .scheduler import (Assignment, Infeasible, RobotSpec, RollingDispatcher,
                        SchedInstance, SchemeSelectionError, SubtaskSpec,
                        build_instance, select_scheme, solve, verify)
from .search import (GroupProfile, SearchContext, SearchParams, SearchResult,
                     TaskSite, candidate_tasks, dominates, expand, node_value,
                     schedule_start_times, search)
from .subtasks import (BackendError, HttpBackend, LayeredDag, PlanLibrary,
                       PromptContext, RuleBackend, SubtaskNode, build_prompt,
                       generate, insert_exploration, retrieve, validate_dag)
from .translate import TranslationBudgetExceeded, translate_to_nba

__version__ = "0.1.0"
