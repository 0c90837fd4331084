#include <doctest.h>

#include <climits>
#include <random>
#include <set>
#include <sstream>

#include "oracles.hpp"
#include "profgen/prefilter.hpp"

using namespace profgen;

namespace {

const SubstitutionMatrix& blosum62() {
    static const SubstitutionMatrix m = load_matrix("BLOSUM62");
    return m;
}

std::vector<uint8_t> from_letters(const std::string& s) {
    return residues_from_string(s, nullptr, "test");
}

int self_score(const std::vector<uint8_t>& seq) {
    int s = 0;
    for (auto r : seq) s += blosum62().score(r, r);
    return s;
}

// Counts exact k-mer matches between query and target on one diagonal.
size_t matches_on_diagonal(const std::vector<uint8_t>& q, std::span<const uint8_t> t, int k,
                           int32_t diag) {
    size_t n = 0;
    for (size_t qpos = 0; qpos + k <= q.size(); ++qpos) {
        const int64_t tpos = static_cast<int64_t>(qpos) - diag;
        if (tpos < 0 || tpos + k > static_cast<int64_t>(t.size())) continue;
        bool match = true;
        for (int i = 0; i < k && match; ++i) {
            match = q[qpos + i] == t[tpos + i] && q[qpos + i] < kNumResidues;
        }
        n += match;
    }
    return n;
}

}  // namespace

TEST_CASE("diagonal_score: all-negative cross scores floor at zero") {
    // BLOSUM62 scores W against P at -4, so every segment is negative.
    const auto q = from_letters("WWWWWWWWWW");
    const auto t = from_letters("PPPPPPPPPP");
    CHECK(blosum62().score(from_letters("W")[0], from_letters("P")[0]) < 0);
    CHECK(diagonal_score(q, t, 0, blosum62()) == 0);
}

TEST_CASE("diagonal_score: a single shared residue contributes its self-score") {
    const auto q = from_letters("WPPPP");
    const auto t = from_letters("WAAAA");
    // Only position 0 is shared on diagonal 0; s(W,W)=11 dominates.
    CHECK(diagonal_score(q, t, 0, blosum62()) == 11);
}

TEST_CASE("diagonal_score equals the exhaustive segment oracle on random pairs") {
    std::mt19937 rng(5);
    for (int trial = 0; trial < 200; ++trial) {
        const auto q = oracle::random_residues(rng, 5 + trial % 60);
        const auto t = oracle::random_residues(rng, 5 + (trial * 7) % 60);
        std::uniform_int_distribution<int32_t> diag_dist(-static_cast<int32_t>(t.size()) + 1,
                                                         static_cast<int32_t>(q.size()) - 1);
        const int32_t d = diag_dist(rng);
        CHECK(diagonal_score(q, t, d, blosum62()) == oracle::diagonal_segments(q, t, d, blosum62()));
    }
}

TEST_CASE("diagonal_score rejects out-of-range diagonals") {
    const auto q = from_letters("ACDEF");
    const auto t = from_letters("ACD");
    CHECK_THROWS_AS(diagonal_score(q, t, 5, blosum62()), InputError);
    CHECK_THROWS_AS(diagonal_score(q, t, -3, blosum62()), InputError);
}

TEST_CASE("a query identical to a target scores its full self-alignment on diagonal 0") {
    const std::string letters = "ACDEFGHIKLMNPQRSTVWY";  // length 20 >= 2k, no X
    std::istringstream fasta(">t0\n" + letters + "\n>t1\nMMMMMMMMMM\n");
    auto [db, idx] = build_index(fasta, 5);
    SequenceRecord query{"q", from_letters(letters)};
    const auto hits = prefilter_query(query, db, idx, PrefilterConfig{}, blosum62());
    REQUIRE(hits.size() == 1);
    CHECK(hits[0].target_id == 0);
    CHECK(hits[0].diagonal == 0);
    CHECK(hits[0].ungapped_score == self_score(query.residues));
}

TEST_CASE("a query sharing no k-mer with any target finds nothing") {
    std::istringstream fasta(">t0\nAAAAAAAAAA\n>t1\nCCCCCCCCCC\n");
    auto [db, idx] = build_index(fasta, 5);
    SequenceRecord query{"q", from_letters("WYWYWYWYWY")};
    CHECK(prefilter_query(query, db, idx, PrefilterConfig{}, blosum62()).empty());
}

TEST_CASE("one k-mer match alone does not trigger; a second on the same diagonal does") {
    // Target 0 shares exactly one 5-mer window with the query; target 1
    // shares the same diagonal twice.
    const std::string shared = "WYHCM";
    std::istringstream fasta(">t0\n" + shared + "PPPPPPPP\n>t1\n" + shared + "AG" + "WYHCM" +
                             "\n");
    auto [db, idx] = build_index(fasta, 5);
    SequenceRecord query{"q", from_letters(shared + "AG" + shared)};
    PrefilterConfig cfg;
    cfg.min_ungapped_score = 1;
    const auto hits = prefilter_query(query, db, idx, cfg, blosum62());
    REQUIRE(hits.size() == 1);
    CHECK(hits[0].target_id == 1);
    CHECK(hits[0].diagonal == 0);
    CHECK(matches_on_diagonal(query.residues, db.sequence(0), 5, 0) == 1);
    CHECK(matches_on_diagonal(query.residues, db.sequence(1), 5, 0) >= 2);
}

TEST_CASE("emitted scores equal the per-diagonal oracle and every hit is sound") {
    std::mt19937 rng(21);
    std::vector<SequenceRecord> records;
    for (int i = 0; i < 10; ++i) records.push_back(oracle::random_record(rng, "t" + std::to_string(i), 30, 60));
    // Make double matches likely: copy query fragments into some targets.
    SequenceRecord query = oracle::random_record(rng, "q", 40, 40);
    for (int i = 0; i < 5; ++i) {
        auto& target = records[i].residues;
        std::copy(query.residues.begin(), query.residues.begin() + 12, target.begin());
        std::copy(query.residues.begin() + 20, query.residues.begin() + 32,
                  target.begin() + static_cast<long>(target.size()) - 12);
    }
    auto db = TargetDB::build(std::move(records));
    auto idx = build_kmer_index(db, 5);

    PrefilterConfig cfg;
    cfg.min_ungapped_score = 1;
    const auto hits = prefilter_query(query, db, idx, cfg, blosum62());
    CHECK(!hits.empty());
    for (const auto& hit : hits) {
        CHECK(hit.ungapped_score ==
              oracle::diagonal_segments(query.residues, db.sequence(hit.target_id), hit.diagonal,
                                        blosum62()));
        CHECK(hit.ungapped_score >= cfg.min_ungapped_score);
        CHECK(matches_on_diagonal(query.residues, db.sequence(hit.target_id), 5, hit.diagonal) >=
              2);
        CHECK(hit.diagonal > -static_cast<int64_t>(db.lengths[hit.target_id]));
        CHECK(hit.diagonal < static_cast<int64_t>(query.length()));
    }
}

TEST_CASE("at most one hit per target, descending score, ties by ascending target id") {
    // Several identical targets force score ties.
    const std::string letters = "ACDEFGHIKLMNPQRSTVWY";
    std::ostringstream fasta;
    for (int i = 0; i < 6; ++i) fasta << ">t" << i << "\n" << letters << "\n";
    std::istringstream in(fasta.str());
    auto [db, idx] = build_index(in, 5);
    SequenceRecord query{"q", from_letters(letters)};

    PrefilterConfig cfg;
    const auto all = prefilter_query(query, db, idx, cfg, blosum62());
    REQUIRE(all.size() == 6);
    std::set<uint32_t> targets;
    for (size_t i = 0; i < all.size(); ++i) {
        targets.insert(all[i].target_id);
        CHECK(all[i].target_id == i);  // equal scores: ascending ids
        if (i > 0) CHECK(all[i - 1].ungapped_score >= all[i].ungapped_score);
    }
    CHECK(targets.size() == 6);

    for (const size_t n : {size_t{1}, size_t{3}, size_t{1000}}) {
        PrefilterConfig capped;
        capped.max_seqs = n;
        const auto hits = prefilter_query(query, db, idx, capped, blosum62());
        CHECK(hits.size() == std::min<size_t>(n, 6));
        // The capped list is a prefix of the full ordering.
        for (size_t i = 0; i < hits.size(); ++i) CHECK(hits[i].target_id == all[i].target_id);
    }
}

TEST_CASE("monotonicity in the admission threshold and the cap") {
    std::mt19937 rng(31);
    std::vector<SequenceRecord> records;
    SequenceRecord query = oracle::random_record(rng, "q", 50, 50);
    for (int i = 0; i < 12; ++i) {
        auto rec = oracle::random_record(rng, "t" + std::to_string(i), 50, 50);
        const size_t frag = 10 + (i % 3) * 6;
        std::copy(query.residues.begin(), query.residues.begin() + frag, rec.residues.begin());
        records.push_back(std::move(rec));
    }
    auto db = TargetDB::build(std::move(records));
    auto idx = build_kmer_index(db, 5);

    const auto run = [&](int min_score, size_t n) {
        PrefilterConfig cfg;
        cfg.min_ungapped_score = min_score;
        cfg.max_seqs = n;
        return prefilter_query(query, db, idx, cfg, blosum62());
    };
    const auto ids = [](const std::vector<PrefilterHit>& hits) {
        std::set<uint32_t> s;
        for (const auto& h : hits) s.insert(h.target_id);
        return s;
    };

    const auto base = run(5, 1000);
    for (int threshold : {10, 20, 40}) {
        const auto tighter = ids(run(threshold, 1000));
        for (uint32_t id : tighter) CHECK(ids(base).count(id) == 1);
        CHECK(tighter.size() <= base.size());
    }
    const auto small = run(5, 3);
    const auto big = ids(run(5, 12));
    for (const auto& hit : small) CHECK(big.count(hit.target_id) == 1);
}

TEST_CASE("prefilter is deterministic across repeated runs") {
    std::mt19937 rng(77);
    std::vector<SequenceRecord> records;
    for (int i = 0; i < 30; ++i) records.push_back(oracle::random_record(rng, "t" + std::to_string(i), 30, 90));
    SequenceRecord query = records[4];
    query.header = "q";
    auto db = TargetDB::build(std::move(records));
    auto idx = build_kmer_index(db, 5);
    PrefilterConfig cfg;
    const auto first = prefilter_query(query, db, idx, cfg, blosum62());
    for (int rep = 0; rep < 5; ++rep) {
        const auto again = prefilter_query(query, db, idx, cfg, blosum62());
        REQUIRE(again.size() == first.size());
        for (size_t i = 0; i < first.size(); ++i) {
            CHECK(again[i].target_id == first[i].target_id);
            CHECK(again[i].diagonal == first[i].diagonal);
            CHECK(again[i].ungapped_score == first[i].ungapped_score);
        }
    }
}

TEST_CASE("queries shorter than k are rejected") {
    std::istringstream fasta(">t\nAAAAAAAA\n");
    auto [db, idx] = build_index(fasta, 5);
    SequenceRecord query{"q", from_letters("ACD")};
    CHECK_THROWS_WITH_AS(prefilter_query(query, db, idx, PrefilterConfig{}, blosum62()),
                         doctest::Contains("shorter than k"), InputError);
}

TEST_CASE("expand_similar_kmers: self-score threshold keeps only the k-mer itself") {
    const auto kmer = from_letters("WWW");
    // W scores 11 against itself and at most 2 against anything else.
    const auto out = expand_similar_kmers(kmer, blosum62(), 33);
    REQUIRE(out.size() == 1);
    CHECK(out[0] == kmer_code(kmer));
}

TEST_CASE("expand_similar_kmers always includes the k-mer itself") {
    const auto kmer = from_letters("ACD");
    const auto out = expand_similar_kmers(kmer, blosum62(), self_score(kmer));
    CHECK(std::find(out.begin(), out.end(), kmer_code(kmer)) != out.end());
}

TEST_CASE("expand_similar_kmers matches exhaustive enumeration at k=3") {
    const auto kmer = from_letters("CHW");
    const int threshold = self_score(kmer) - 4;
    auto got = expand_similar_kmers(kmer, blosum62(), threshold);
    auto want = oracle::similar_kmers(kmer, blosum62(), threshold);
    std::sort(want.begin(), want.end());
    CHECK(got == want);
}

TEST_CASE("unbounded expansion is rejected for k>4 but enumerable at k=4") {
    const auto k5 = from_letters("ACDEF");
    CHECK_THROWS_WITH_AS(expand_similar_kmers(k5, blosum62(), INT_MIN / 2),
                         doctest::Contains("expansion too large"), InputError);
    const auto k4 = from_letters("ACDE");
    const auto all = expand_similar_kmers(k4, blosum62(), INT_MIN / 2);
    CHECK(all.size() == kmer_bucket_count(4));
}

TEST_CASE("similar-k-mer expansion widens prefilter sensitivity") {
    // Target carries two conservatively mutated copies of the query k-mers
    // on one diagonal (I<->V, K<->R score positively but mismatch exactly).
    SequenceRecord query{"q", from_letters("AIKDECAIKDEC")};
    std::istringstream fasta(">t\nAVRDECAVRDEC\n");
    auto [db, idx] = build_index(fasta, 5);

    PrefilterConfig exact;
    exact.min_ungapped_score = 1;
    CHECK(prefilter_query(query, db, idx, exact, blosum62()).empty());

    PrefilterConfig fuzzy = exact;
    fuzzy.similar_kmer_threshold = 8;
    const auto hits = prefilter_query(query, db, idx, fuzzy, blosum62());
    REQUIRE(hits.size() == 1);
    CHECK(hits[0].target_id == 0);
    CHECK(hits[0].diagonal == 0);
}
