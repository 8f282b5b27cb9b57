#include "doctest.h"

#include "ftpram/faults.hpp"
#include "ftpram/preprocess.hpp"
#include "ftpram/simulator.hpp"

using namespace ftpram;

namespace {

struct Built {
    SimulationParams params;
    FaultyMachine machine;
    MemoryMap map;
};

Built build(std::size_t n, double multiple, FaultKind kind, double f, std::uint64_t seed)
{
    SimulationParams probe = derive_params_scaled(f, f, n, multiple);
    const std::size_t m = static_cast<std::size_t>(multiple * probe.alpha * static_cast<double>(n));
    SimulationParams p = derive_params(f, f, n, m);
    FaultSpec spec;
    spec.kind = kind;
    spec.fp = f;
    spec.fs = f;
    spec.seed = seed;
    FaultPattern pat = f == 0 ? FaultPattern{} : generate_pattern(spec, n, m, p.alpha, p.beta);
    FaultyMachine machine(n, m, Variant::erew, pat);
    MemoryMap map = preprocess(machine, p);
    return Built{p, std::move(machine), std::move(map)};
}

}  // namespace

TEST_CASE("fault-free preprocessing activates every processor")
{
    auto b = build(8, 2.0, FaultKind::random, 0.0, 1);
    CHECK(b.map.active.size() == 8);
    CHECK(b.map.participants == 8);
    CHECK(b.map.m_virtual == (std::uint64_t{8} << b.map.r));
    CHECK(memory_tree_inorder(b.machine, b.map) == flat_storage_table(b.map));
    CHECK(b.machine.total_conflicts() == 0);
}

TEST_CASE("preprocessing under random faults")
{
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        auto b = build(16, 2.0, FaultKind::random, 0.2, seed);
        CHECK(b.map.active.size() >= b.params.k);
        CHECK(memory_tree_inorder(b.machine, b.map) == flat_storage_table(b.map));
    }
}

TEST_CASE("offsets are prefix sums of capacities")
{
    for (FaultKind kind : {FaultKind::random, FaultKind::block_cluster, FaultKind::prefix, FaultKind::stride}) {
        auto b = build(32, 2.0, kind, 0.2, 7);
        CHECK(check_offsets(b.map).empty());
        auto broken = b.map;
        REQUIRE(broken.blocks.size() > 1);
        broken.blocks[1].global_offset += 1;
        CHECK(check_offsets(broken).size() == 1);
    }
}
