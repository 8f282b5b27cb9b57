#include "doctest.h"

#include "ftpram/faults.hpp"
#include "ftpram/isa.hpp"
#include "ftpram/preprocess.hpp"
#include "ftpram/simulator.hpp"

#include <random>

using namespace ftpram;

namespace {

struct Built {
    SimulationParams params;
    FaultyMachine machine;
    MemoryMap map;
};

Built build(std::size_t n, Variant v, FaultKind kind, double f, std::uint64_t seed, double multiple = 2.0)
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
    FaultyMachine machine(n, m, v, pat);
    MemoryMap map = preprocess(machine, p);
    return Built{p, std::move(machine), std::move(map)};
}

}  // namespace

TEST_CASE("simulated processors are spread over the active ranks")
{
    auto a = assign_simulated(3, 8);
    std::vector<std::size_t> load(3);
    for (auto r : a) ++load[r];
    CHECK(load == std::vector<std::size_t>{3, 3, 2});
    CHECK(assign_simulated(4, 4) == std::vector<std::size_t>{0, 1, 2, 3});
    auto b = assign_simulated(5, 2);
    CHECK(b.size() == 2);
    CHECK(b[0] < b[1]);
}

TEST_CASE("translation agrees with the flat table")
{
    std::mt19937_64 rng(8);
    for (Variant v : {Variant::erew, Variant::crew, Variant::crcw})
        for (std::uint64_t seed = 1; seed <= 3; ++seed) {
            auto b = build(16, v, FaultKind::random, 0.2, seed);
            auto table = flat_storage_table(b.map);
            const std::size_t A = b.map.active.size();
            for (int trial = 0; trial < 5; ++trial) {
                std::vector<AccessRequest> reqs;
                std::vector<Address> seen;
                for (std::size_t r = 0; r < A; ++r) {
                    if (rng() % 4 == 0) continue;
                    Address va = rng() % b.map.m_virtual;
                    // EREW needs distinct addresses
                    if (v == Variant::erew && std::find(seen.begin(), seen.end(), va) != seen.end()) continue;
                    seen.push_back(va);
                    reqs.push_back({r, va});
                }
                TranslateStats st;
                auto got = translate(b.machine, b.map, reqs, &st, true);
                REQUIRE(got.size() == reqs.size());
                for (std::size_t i = 0; i < reqs.size(); ++i) CHECK(got[i] == table[reqs[i].vaddr]);
                CHECK(st.violations.empty());
                CHECK(b.machine.total_conflicts() == 0);
            }
        }
}

TEST_CASE("install boundaries")
{
    auto b = build(8, Variant::erew, FaultKind::random, 0.0, 1);
    auto prog = parse_program(programs::write_all());
    const std::size_t image = 2 * prog.code.size();
    const std::size_t room = b.map.m_virtual - image;
    std::vector<Word> data(room, 7);
    auto inst = install_input(b.machine, b.map, prog, data, room);
    CHECK(read_simulated(b.machine, b.map, inst) == data);
    CHECK_THROWS_AS(install_input(b.machine, b.map, prog, {}, room + 1), std::length_error);
    CHECK_THROWS(install_input(b.machine, b.map, prog, {1, 2, 3}, 2));
}

TEST_CASE("simulated runs match the fault-free run")
{
    struct Case {
        std::string text;
        std::vector<Word> data;
        std::size_t n_sim, m_sim;
    };
    std::vector<Case> cases = {{programs::write_all(), {}, 12, 12},
                               {programs::prefix_sum(), {3, 1, 4, 1, 5, 9, 2, 6}, 8, 8},
                               {programs::odd_even_sort(), {5, 2, 7, 1, 0, 3}, 6, 9}};
    for (Variant v : {Variant::erew, Variant::crew, Variant::crcw})
        for (const auto& c : cases)
            for (FaultKind kind : {FaultKind::random, FaultKind::block_cluster}) {
                auto b = build(16, v, kind, 0.2, 5, 4.0);
                auto prog = parse_program(c.text);
                auto ideal = run_ideal(prog, c.data, c.n_sim, c.m_sim, v);
                SimOptions opt;
                opt.verify = true;
                auto sim = simulate_program(b.machine, b.map, prog, c.data, c.n_sim, c.m_sim, kDefaultBudget, opt);
                CHECK(sim.memory == ideal.memory);
                CHECK(sim.steps == ideal.steps);
                CHECK(sim.violations.empty());
                CHECK(b.machine.total_conflicts() == 0);
                CHECK(sim.rounds_per_step.size() == sim.steps);
            }
}

TEST_CASE("semantic errors surface from the simulated run")
{
    auto b = build(8, Variant::erew, FaultKind::random, 0.0, 1);
    auto prog = parse_program("LOADI R1, 0\nWRITE [R1], PID\nHALT\n");
    CHECK_THROWS_AS(simulate_program(b.machine, b.map, prog, {}, 2, 4), SemanticError);
    auto c = build(8, Variant::crcw, FaultKind::random, 0.0, 1);
    auto sim = simulate_program(c.machine, c.map, prog, {}, 3, 4);
    CHECK(sim.memory[0] == 1);
}
