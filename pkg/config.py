"""Configuration loader for the flow-module toolkit."""

import os
from dotenv import load_dotenv

load_dotenv()

TOOL_VERSION = "0.3.0"

# Flow model
MARKOV_TIME = float(os.getenv("MARKOV_TIME", "1.0"))
DIRECTED_TELEPORT = float(os.getenv("DIRECTED_TELEPORT", "0.15"))  # undirected networks never teleport
POWER_ITERATION_TOL = float(os.getenv("POWER_ITERATION_TOL", "1e-15"))
POWER_ITERATION_MAX_ITER = int(os.getenv("POWER_ITERATION_MAX_ITER", "10000"))

# Dense oracles (test-only matrices)
DENSE_NODE_CAP = int(os.getenv("DENSE_NODE_CAP", "2000"))
CONTINUOUS_TAIL_TOL = float(os.getenv("CONTINUOUS_TAIL_TOL", "1e-12"))

# Search
SEARCH_TRIALS = int(os.getenv("SEARCH_TRIALS", "10"))
SEARCH_TUNE_ITERATIONS = int(os.getenv("SEARCH_TUNE_ITERATIONS", "10"))
SEARCH_MIN_IMPROVEMENT = float(os.getenv("SEARCH_MIN_IMPROVEMENT", "1e-10"))
SEED = int(os.getenv("SEED", "123"))

# Fast projection
FAST_PROJECTION_X = int(os.getenv("FAST_PROJECTION_X", "1000"))
FAST_PROJECTION_Y = int(os.getenv("FAST_PROJECTION_Y", "10"))

# Entropy-rate sampling
ENTROPY_STARTS = int(os.getenv("ENTROPY_STARTS", "200"))
ENTROPY_WALKS = int(os.getenv("ENTROPY_WALKS", "5000"))

# Schematic bipartite fixture
SCHEMATIC_COMMUNITIES = int(os.getenv("SCHEMATIC_COMMUNITIES", "2"))
SCHEMATIC_PRIMARIES = int(os.getenv("SCHEMATIC_PRIMARIES", "8"))
SCHEMATIC_FEATURES = int(os.getenv("SCHEMATIC_FEATURES", "8"))

# Output
RESULTS_DIR = os.getenv("RESULTS_DIR", "results")
