// SPDX-License-Identifier: Apache-2.0
#pragma once

// Umbrella header.

#include "phylotrace/consensus.hpp"
#include "phylotrace/distance_matrix.hpp"
#include "phylotrace/dtype.hpp"
#include "phylotrace/embeddings.hpp"
#include "phylotrace/error.hpp"
#include "phylotrace/genotype.hpp"
#include "phylotrace/importance.hpp"
#include "phylotrace/manifest.hpp"
#include "phylotrace/metrics.hpp"
#include "phylotrace/neighbor_joining.hpp"
#include "phylotrace/newick.hpp"
#include "phylotrace/parallel.hpp"
#include "phylotrace/pca.hpp"
#include "phylotrace/permutation_test.hpp"
#include "phylotrace/random_tree.hpp"
#include "phylotrace/render.hpp"
#include "phylotrace/rng.hpp"
#include "phylotrace/robinson_foulds.hpp"
#include "phylotrace/simulate.hpp"
#include "phylotrace/tensor_archive.hpp"
#include "phylotrace/tree.hpp"
#include "phylotrace/version.hpp"
