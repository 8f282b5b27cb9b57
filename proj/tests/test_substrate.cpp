#include "doctest.h"

#include "ftpram/faults.hpp"
#include "ftpram/kernels.hpp"
#include "ftpram/substrate.hpp"

#include <map>
#include <random>

using namespace ftpram;

TEST_CASE("machine construction")
{
    FaultyMachine m(4, 16, Variant::erew, {});
    CHECK(m.faulty_processor_count() == 0);
    CHECK(m.faulty_cell_count() == 0);
    for (Address a = 0; a < 16; ++a) CHECK(m.peek(a) == 0);
    CHECK(m.round() == 0);

    FaultPattern all;
    for (Address a = 0; a < 16; ++a) all.faulty_cells.insert(a);
    FaultyMachine dead(4, 16, Variant::erew, all);
    for (Address a = 0; a < 16; ++a) {
        CHECK(dead.read(1, a).is_fault());
        dead.end_round();
    }

    FaultPattern bad;
    bad.faulty_processors = {5};
    CHECK_THROWS_AS(FaultyMachine(4, 16, Variant::erew, bad), ConstructionError);
    CHECK_THROWS_AS(FaultyMachine(4, 3, Variant::erew, {}), ConstructionError);
}

TEST_CASE("reads and writes")
{
    FaultPattern pat;
    pat.faulty_cells = {2};
    pat.faulty_processors = {4};
    FaultyMachine m(4, 16, Variant::erew, pat);
    CHECK(m.write(1, 0, 7).is_ok());
    m.end_round();
    CHECK(m.read(1, 0) == AccessResult::ok(7));
    m.end_round();
    CHECK(m.write(1, 2, 5).is_fault());
    m.end_round();
    CHECK(m.read(1, 2).is_fault());
    m.end_round();
    CHECK_THROWS(m.read(4, 0));  // fail-stop processor
    CHECK(m.accesses_by(4) == 0);
}

TEST_CASE("conflict rules per variant")
{
    auto two_reads = [](Variant v) {
        FaultyMachine m(4, 16, v, {});
        m.set_strict(false);
        m.read(1, 3);
        m.read(2, 3);
        return m.end_round();
    };
    auto r = two_reads(Variant::erew);
    REQUIRE(r.conflicts.size() == 1);
    CHECK(r.conflicts[0].cell == 3);
    CHECK(r.conflicts[0].procs == std::vector<ProcId>{1, 2});
    CHECK(two_reads(Variant::crew).empty());

    FaultyMachine crew(4, 16, Variant::crew, {});
    crew.read(1, 3);
    crew.write(2, 3, 1);
    CHECK_THROWS_AS(crew.end_round(), ConflictError);

    FaultyMachine crcw(4, 16, Variant::crcw, {});
    crcw.write(3, 5, 9);
    crcw.write(1, 5, 4);
    CHECK(crcw.end_round().empty());
    CHECK(crcw.peek(5) == 4);
}

TEST_CASE("one access per processor per round")
{
    FaultyMachine m(4, 16, Variant::crew, {});
    m.read(1, 0);
    CHECK_THROWS(m.read(1, 1));
}

TEST_CASE("serial and parallel ledger validation agree, and match a brute-force scan")
{
    std::mt19937_64 rng(5);
    for (int trial = 0; trial < 200; ++trial) {
        const std::size_t k = 1 + rng() % 40;
        std::vector<AccessRecord> ledger;
        for (std::size_t i = 0; i < k; ++i)
            ledger.push_back({static_cast<ProcId>(i + 1), rng() % 12,
                              (rng() & 1) ? AccessMode::write : AccessMode::read, rng() % 100});
        for (Variant v : {Variant::erew, Variant::crew, Variant::crcw}) {
            auto s = kernels::validate_ledger_serial(v, ledger);
            auto p = kernels::validate_ledger_parallel(v, ledger);
            CHECK(s.conflicts.size() == p.conflicts.size());
            CHECK(s.commits == p.commits);
            // oracle: count per cell
            std::map<Address, std::pair<int, int>> use;  // reads, writes
            for (const auto& a : ledger) (a.mode == AccessMode::read ? use[a.address].first : use[a.address].second)++;
            std::size_t expected = 0;
            for (const auto& [cell, rw] : use) {
                const int total = rw.first + rw.second;
                if (v == Variant::erew && total > 1) ++expected;
                if (v == Variant::crew && rw.second > 0 && total > 1) ++expected;
            }
            CHECK(s.conflicts.size() == expected);
            // lowest writer wins
            for (const auto& [cell, value] : s.commits) {
                ProcId best = 0;
                Word want = 0;
                for (const auto& a : ledger)
                    if (a.mode == AccessMode::write && a.address == cell && (best == 0 || a.proc < best)) {
                        best = a.proc;
                        want = a.value;
                    }
                CHECK(value == want);
            }
        }
    }
}

TEST_CASE("static faults survive a run and replay is deterministic")
{
    FaultSpec spec;
    spec.kind = FaultKind::random;
    spec.fp = 0.25;
    spec.fs = 0.25;
    spec.seed = 99;
    auto pat = generate_pattern(spec, 8, 64, 6, 3);
    {
        auto again = generate_pattern(spec, 8, 64, 6, 3);
        CHECK(pat.faulty_cells == again.faulty_cells);
        CHECK(pat.faulty_processors == again.faulty_processors);
    }
    auto run = [&] {
        FaultyMachine m(8, 64, Variant::erew, pat);
        for (int r = 0; r < 10; ++r) {
            for (ProcId p = 1; p <= 8; ++p)
                if (m.processor_ok(p)) m.write(p, (p * 8 + static_cast<ProcId>(r)) % 64, static_cast<Word>(r * p));
            m.end_round();
        }
        std::vector<Word> cells;
        for (Address a = 0; a < 64; ++a) cells.push_back(m.peek(a));
        for (Address a = 0; a < 64; ++a) CHECK(m.cell_ok(a) == (pat.faulty_cells.count(a) == 0));
        for (ProcId p = 1; p <= 8; ++p)
            if (!m.processor_ok(p)) CHECK(m.accesses_by(p) == 0);
        return cells;
    };
    CHECK(run() == run());
}

TEST_CASE("fault generators respect the budgets")
{
    for (FaultKind k : {FaultKind::random, FaultKind::block_cluster, FaultKind::prefix, FaultKind::stride}) {
        FaultSpec spec;
        spec.kind = k;
        spec.fp = 0.2;
        spec.fs = 0.2;
        spec.seed = 4;
        auto pat = generate_pattern(spec, 16, 1024, 20, 8);
        CHECK(pat.faulty_processors.size() <= 3);
        CHECK(pat.faulty_cells.size() <= 204);
        for (auto p : pat.faulty_processors) CHECK((p >= 1 && p <= 16));
        for (auto a : pat.faulty_cells) CHECK(a < 1024);
    }
}

TEST_CASE("fault spec JSON")
{
    auto s = parse_fault_spec(R"({"faulty_processors":[1,3],"faulty_cells":[0,7]})");
    CHECK(s.kind == FaultKind::explicit_list);
    CHECK(s.pattern.faulty_processors == std::set<ProcId>{1, 3});
    auto g = parse_fault_spec(R"({"kind":"stride","fp":0.1,"fs":0.2,"seed":5})");
    CHECK(g.kind == FaultKind::stride);
    CHECK(g.seed == 5);
    CHECK(parse_fault_spec(fault_spec_to_json(g)).fs == doctest::Approx(0.2));
    CHECK_THROWS(parse_fault_spec("{\"kind\":\"nope\"}"));
}
