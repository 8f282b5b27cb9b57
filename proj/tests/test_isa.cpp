#include "doctest.h"

#include "ftpram/isa.hpp"

#include <algorithm>
#include <map>
#include <numeric>
#include <random>

using namespace ftpram;

TEST_CASE("parsing")
{
    CHECK(parse_program("HALT").code.size() == 1);
    auto loop = parse_program("loop: JMP loop");
    REQUIRE(loop.code.size() == 1);
    CHECK(loop.code[0].target == 0);

    auto expect_line = [](const std::string& text, int line) {
        try {
            parse_program(text);
            FAIL("expected a parse error");
        } catch (const ParseError& e) {
            CHECK(e.line() == line);
        }
    };
    expect_line("JMP nowhere", 1);
    expect_line("HALT\nFROB R1", 2);
    expect_line("LOADI R16, 3", 1);
    expect_line("MOV PID, R1", 1);
    expect_line("ADD R1, R2", 1);
    expect_line("READ R1, R2", 1);
    expect_line("x: HALT\nx: HALT", 2);

    auto p = parse_program("; comment only\n  start: loadi r1, 0x10 ; trailing\n  write [r1], pid\n  end:\n");
    REQUIRE(p.code.size() == 2);
    CHECK(p.code[0].imm == 16);
    CHECK(p.code[1].b == kRegPid);
    CHECK(p.labels.at("end") == 2);
    CHECK(parse_program("LOADI R1, -1").code[0].imm == ~Word{0});
}

TEST_CASE("print and parse round trip")
{
    std::mt19937_64 rng(2);
    std::vector<std::string> texts = {programs::write_all(), programs::prefix_sum(), programs::odd_even_sort(),
                                      "a: b: HALT\nJMP b\nend:\n"};
    for (int i = 0; i < 20; ++i)
        texts.push_back(programs::random_straight_line(rng, 8, 64, static_cast<Variant>(i % 3), 30));
    for (const auto& t : texts) {
        auto p = parse_program(t);
        CHECK(parse_program(print_program(p)) == p);
    }
}

TEST_CASE("data files")
{
    CHECK(parse_data("1 2\n0x10\t7") == std::vector<Word>{1, 2, 16, 7});
    CHECK(parse_data("").empty());
    CHECK_THROWS(parse_data("1 zz"));
}

TEST_CASE("write-all and prefix sums")
{
    auto w = run_ideal(parse_program(programs::write_all()), {}, 4, 4, Variant::erew);
    CHECK(w.memory == std::vector<Word>{1, 1, 1, 1});
    auto ps = run_ideal(parse_program(programs::prefix_sum()), {1, 1, 1, 1}, 4, 4, Variant::erew);
    CHECK(ps.memory == std::vector<Word>{1, 2, 3, 4});
    std::mt19937_64 rng(4);
    for (std::size_t n : {1u, 2u, 5u, 8u, 13u, 32u}) {
        std::vector<Word> data(n);
        for (auto& d : data) d = rng() % 1000;
        auto got = run_ideal(parse_program(programs::prefix_sum()), data, n, n, Variant::erew);
        std::vector<Word> want(n);
        std::partial_sum(data.begin(), data.end(), want.begin());
        CHECK(got.memory == want);
    }
}

TEST_CASE("odd-even sort sorts under EREW")
{
    std::mt19937_64 rng(6);
    for (std::size_t n : {1u, 2u, 3u, 8u, 11u, 16u}) {
        std::vector<Word> data(n);
        for (auto& d : data) d = rng() % 50;
        auto got = run_ideal(parse_program(programs::odd_even_sort()), data, n, n + 3, Variant::erew);
        auto want = data;
        std::sort(want.begin(), want.end());
        want.resize(n + 3, 0);
        CHECK(got.memory == want);
    }
}

TEST_CASE("conflicts and budgets")
{
    const std::string same_cell = "LOADI R1, 0\nWRITE [R1], PID\nHALT\n";
    try {
        run_ideal(parse_program(same_cell), {}, 2, 4, Variant::erew);
        FAIL("expected a conflict");
    } catch (const SemanticError& e) {
        CHECK(e.step() == 1);
        CHECK(e.cell() == 0);
        CHECK(e.procs() == std::vector<ProcId>{1, 2});
    }
    CHECK_THROWS_AS(run_ideal(parse_program(same_cell), {}, 2, 4, Variant::crew), SemanticError);
    auto crcw = run_ideal(parse_program(same_cell), {}, 3, 4, Variant::crcw);
    CHECK(crcw.memory[0] == 1);

    const std::string shared_read = "LOADI R1, 0\nREAD R2, [R1]\nHALT\n";
    CHECK_THROWS_AS(run_ideal(parse_program(shared_read), {}, 2, 4, Variant::erew), SemanticError);
    CHECK_NOTHROW(run_ideal(parse_program(shared_read), {}, 2, 4, Variant::crew));

    CHECK_THROWS_AS(run_ideal(parse_program("loop: JMP loop"), {}, 2, 2, Variant::erew, 100), BudgetError);
    CHECK_THROWS_AS(run_ideal(parse_program("LOADI R1, 9\nREAD R2, [R1]"), {}, 1, 4, Variant::erew),
                    SemanticError);
    CHECK_THROWS(run_ideal(parse_program("HALT"), {1, 2, 3}, 1, 2, Variant::erew));
    CHECK(run_ideal(parse_program(""), {}, 3, 3, Variant::erew).steps == 0);
}

TEST_CASE("CRCW priority against the step ledger, and determinism")
{
    std::mt19937_64 rng(12);
    for (int trial = 0; trial < 30; ++trial) {
        const std::size_t n = 2 + rng() % 8, m = n * (1 + rng() % 4);
        auto text = programs::random_straight_line(rng, n, m, Variant::crcw, 25);
        auto prog = parse_program(text);
        std::vector<Word> data(m);
        for (auto& d : data) d = rng() % 100;
        auto a = run_ideal(prog, data, n, m, Variant::crcw, kDefaultBudget, true);
        auto b = run_ideal(prog, data, n, m, Variant::crcw, kDefaultBudget, true);
        CHECK(a.memory == b.memory);
        // replay the ledgers: the lowest writer's value must be in memory at the end unless overwritten later
        std::vector<Word> mem = data;
        for (const auto& step : a.ledgers) {
            std::map<Address, std::pair<ProcId, Word>> win;
            for (const auto& r : step)
                if (r.mode == AccessMode::write && (!win.count(r.address) || r.proc < win[r.address].first))
                    win[r.address] = {r.proc, r.value};
            for (const auto& [cell, pv] : win) mem[cell] = pv.second;
        }
        CHECK(mem == a.memory);
    }
}

TEST_CASE("random straight-line programs respect their variant")
{
    std::mt19937_64 rng(13);
    for (Variant v : {Variant::erew, Variant::crew, Variant::crcw})
        for (int trial = 0; trial < 20; ++trial) {
            const std::size_t n = 1 + rng() % 16;
            auto prog = parse_program(programs::random_straight_line(rng, n, 3 * n, v, 20));
            CHECK_NOTHROW(run_ideal(prog, {}, n, 3 * n, v));
        }
}
