#include <doctest.h>

#include <random>

#include "aclust/cluster_state.hpp"

using namespace aclust;

TEST_CASE("fresh singletons are their own representatives") {
    ClusterState s;
    for (int i = 0; i < 5; ++i) CHECK(index_of(s.add()) == static_cast<std::uint32_t>(i));
    for (std::uint32_t i = 0; i < 5; ++i) {
        CHECK(s.representative(address_id(i)) == address_id(i));
        CHECK(s.component_size(address_id(i)) == 1);
    }
    CHECK(s.num_clusters() == 5);
    CHECK(s.num_clusters_ge2() == 0);
}

TEST_CASE("representative is the component minimum regardless of structure") {
    ClusterState s;
    for (int i = 0; i < 6; ++i) s.add();
    // Grow {3,4,5} first so its root outweighs 1.
    s.unite_roots({s.find_root(4), s.find_root(5)});
    s.unite_roots({s.find_root(3), s.find_root(5)});
    s.unite_roots({s.find_root(1), s.find_root(4)});
    for (std::uint32_t i : {1u, 3u, 4u, 5u}) {
        CHECK(s.representative(address_id(i)) == address_id(1));
        CHECK(s.component_size(address_id(i)) == 4);
    }
    CHECK(s.is_representative(address_id(1)));
    CHECK_FALSE(s.is_representative(address_id(3)));
    CHECK(s.num_clusters() == 3);
    CHECK(s.num_clusters_ge2() == 1);
    auto clusters = s.clusters();
    REQUIRE(clusters.size() == 3);
    CHECK(clusters[0] == std::pair{address_id(0), std::uint64_t{1}});
    CHECK(clusters[1] == std::pair{address_id(1), std::uint64_t{4}});
    CHECK(clusters[2] == std::pair{address_id(2), std::uint64_t{1}});
}

TEST_CASE("random unions keep the size and label invariants") {
    std::mt19937_64 rng(7);
    ClusterState s;
    std::vector<std::uint32_t> naive;  // naive[i] = min label via relabelling
    for (int step = 0; step < 3000; ++step) {
        if (naive.size() < 2 || rng() % 3 == 0) {
            s.add();
            naive.push_back(static_cast<std::uint32_t>(naive.size()));
            continue;
        }
        const auto a = static_cast<std::uint32_t>(rng() % naive.size());
        const auto b = static_cast<std::uint32_t>(rng() % naive.size());
        const auto ra = s.find_root(a), rb = s.find_root(b);
        if (ra != rb) s.unite_roots({ra, rb});
        const auto la = naive[a], lb = naive[b];
        const auto lo = std::min(la, lb), hi = std::max(la, lb);
        for (auto& l : naive) {
            if (l == hi) l = lo;
        }
    }
    std::uint64_t total = 0;
    for (const auto& [rep, size] : s.clusters()) total += size;
    CHECK(total == s.size());
    for (std::uint32_t i = 0; i < naive.size(); ++i) {
        CHECK(index_of(s.representative(address_id(i))) == naive[i]);
        const auto size = std::count(naive.begin(), naive.end(), naive[i]);
        CHECK(s.component_size(address_id(i)) == static_cast<std::uint64_t>(size));
    }

    // Flattening is a canonical form that assign() reproduces.
    ClusterState copy;
    REQUIRE(copy.assign(s.flattened_parents()));
    CHECK(copy == s);
    CHECK(copy.num_clusters() == s.num_clusters());
    CHECK(copy.num_clusters_ge2() == s.num_clusters_ge2());
    for (std::uint32_t i = 0; i < naive.size(); ++i) {
        CHECK(copy.representative(address_id(i)) == s.representative(address_id(i)));
    }
}

TEST_CASE("assign rejects malformed forests") {
    ClusterState s;
    CHECK_FALSE(s.assign({1, 0}));  // cycle
    CHECK_FALSE(s.assign({5}));     // out of range
    CHECK(s.assign({}));
    CHECK(s.assign({0, 0, 2}));
    CHECK(s.num_clusters() == 2);
}
