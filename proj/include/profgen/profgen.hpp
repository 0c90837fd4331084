#pragma once

#include "profgen/align.hpp"
#include "profgen/alphabet.hpp"
#include "profgen/bench.hpp"
#include "profgen/binio.hpp"
#include "profgen/daemon.hpp"
#include "profgen/errors.hpp"
#include "profgen/fasta.hpp"
#include "profgen/goldendb.hpp"
#include "profgen/kmer_index.hpp"
#include "profgen/parallel.hpp"
#include "profgen/pipeline.hpp"
#include "profgen/prefilter.hpp"
#include "profgen/profiler.hpp"
#include "profgen/substitution_matrix.hpp"
#include "profgen/target_db.hpp"
#include "profgen/tuples.hpp"
