#include "doctest.h"

#include "ftpram/dispersal.hpp"
#include "ftpram/params.hpp"

#include <algorithm>
#include <random>

using namespace ftpram;

namespace {

// Schoolbook GF(2)[x] product reduced bit by bit; independent of Field::mul.
Elem slow_mul(Elem a, Elem b, int t)
{
    const std::uint64_t mod = irreducible_polynomial(t);
    std::uint64_t r = 0;
    for (int i = 0; i < t; ++i)
        if ((b >> i) & 1u) r ^= std::uint64_t{a} << i;
    for (int bit = 63; bit >= t; --bit)
        if ((r >> bit) & 1u) r ^= mod << (bit - t);
    return static_cast<Elem>(r);
}

bool irreducible_by_trial(std::uint64_t poly, int t)
{
    // no factor of degree 1..t/2
    auto deg = [](std::uint64_t p) { return 63 - __builtin_clzll(p); };
    for (std::uint64_t d = 2; deg(d) <= t / 2; ++d) {
        std::uint64_t r = poly;
        while (r != 0 && deg(r) >= deg(d)) r ^= d << (deg(r) - deg(d));
        if (r == 0) return false;
    }
    return true;
}

void all_subsets(std::size_t n, std::size_t k, std::size_t from, std::vector<std::size_t>& cur,
                 std::vector<std::vector<std::size_t>>& out)
{
    if (cur.size() == k) {
        out.push_back(cur);
        return;
    }
    for (std::size_t i = from; i < n; ++i) {
        cur.push_back(i);
        all_subsets(n, k, i + 1, cur, out);
        cur.pop_back();
    }
}

}  // namespace

TEST_CASE("field examples for t=3")
{
    Field f(3);
    CHECK(f.modulus() == 0b1011);
    CHECK(f.add(0b011, 0b011) == 0);
    CHECK(f.mul(0b010, 0b100) == 0b011);
    CHECK(f.inv(0b010) == 0b101);
    CHECK_THROWS_AS(f.inv(0), ArithmeticError);
    CHECK_THROWS_AS(f.mul(8, 1), ArithmeticError);
    // x has order 7: its powers are all nonzero elements
    std::vector<Elem> seen;
    for (int i = 1; i <= 7; ++i) seen.push_back(f.pow(0b010, static_cast<std::uint64_t>(i)));
    std::sort(seen.begin(), seen.end());
    CHECK(std::unique(seen.begin(), seen.end()) == seen.end());
    CHECK(find_primitive(3) == 0b010);
    CHECK(find_primitive(1) == 1);
}

TEST_CASE("table polynomials are irreducible")
{
    for (int t = 1; t <= 20; ++t) CHECK(irreducible_by_trial(irreducible_polynomial(t), t));
    CHECK_THROWS_AS(irreducible_polynomial(0), ArithmeticError);
    CHECK_THROWS_AS(irreducible_polynomial(33), ArithmeticError);
}

TEST_CASE("primitive elements generate the group")
{
    for (int t = 1; t <= 12; ++t) {
        Field f(t);
        const Elem w = f.primitive();
        const std::uint64_t order = f.order() - 1;
        CHECK(f.pow(w, order) == 1);
        for (std::uint64_t d = 1; d < order; ++d)
            if (order % d == 0) CHECK(f.pow(w, d) != 1);
    }
    for (int t : {16, 24, 32}) {
        Field f(t);
        CHECK(f.pow(f.primitive(), f.order() - 1) == 1);
        for (auto q : prime_factors(f.order() - 1)) CHECK(f.pow(f.primitive(), (f.order() - 1) / q) != 1);
    }
}

TEST_CASE("field axioms, exhaustively for small t")
{
    for (int t = 2; t <= 4; ++t) {
        Field f(t);
        const Elem q = static_cast<Elem>(f.order());
        for (Elem a = 0; a < q; ++a) {
            if (a != 0) CHECK(f.mul(a, f.inv(a)) == 1);
            for (Elem b = 0; b < q; ++b) {
                CHECK(f.mul(a, b) == slow_mul(a, b, t));
                CHECK(f.mul(a, b) == f.mul(b, a));
                for (Elem c = 0; c < q; ++c) {
                    CHECK(f.mul(f.mul(a, b), c) == f.mul(a, f.mul(b, c)));
                    CHECK(f.mul(a, f.add(b, c)) == f.add(f.mul(a, b), f.mul(a, c)));
                }
            }
        }
    }
}

TEST_CASE("multiplication matches the schoolbook oracle for large t")
{
    std::mt19937_64 rng(8);
    for (int t : {8, 13, 24, 31, 32}) {
        Field f(t);
        for (int i = 0; i < 500; ++i) {
            Elem a = static_cast<Elem>(rng() % f.order()), b = static_cast<Elem>(rng() % f.order());
            CHECK(f.mul(a, b) == slow_mul(a, b, t));
            if (a) CHECK(f.mul(a, f.inv(a)) == 1);
        }
    }
}

TEST_CASE("encoding examples, t=3, k=2")
{
    Field f(3);
    auto v = encode_strings({1, 1}, 3, f);
    CHECK(v[0] == Packet{1, 0b011});
    CHECK(v[1] == Packet{2, 0b101});
    CHECK(v[2] == Packet{3, 0b010});
    for (const auto& p : encode_strings({0, 0}, 5, f)) CHECK(p.value == 0);
    for (const auto& p : encode_strings({6, 0}, 5, f)) CHECK(p.value == 6);
    CHECK(decode_strings({{1, 0b011}, {3, 0b010}}, f) == std::vector<Elem>{1, 1});
    CHECK(decode_strings({{2, 0}, {5, 0}, {6, 0}}, f) == std::vector<Elem>{0, 0, 0});
    CHECK_THROWS_AS(decode_strings({{1, 3}, {1, 3}}, f), InputError);
}

TEST_CASE("interpolation through points of a low-degree polynomial has zero high coefficients")
{
    Field f(5);
    auto pk = encode_strings({3, 7, 0, 0}, 10, f);
    auto u = decode_strings({pk[1], pk[4], pk[6], pk[9]}, f);
    CHECK(u == std::vector<Elem>{3, 7, 0, 0});
}

TEST_CASE("every 3-subset of 6 packets decodes")
{
    const std::size_t n = 6, k = 3;
    const int t = field_exponent(n);
    Field f(t);
    const std::vector<Elem> u = {5, 1, 6};
    auto pk = encode_strings(u, n, f);
    const std::vector<std::uint8_t> bytes = {'s', 'i', 'x', 0, 255};
    auto striped = encode_striped(bytes, n, k, t);
    std::vector<std::vector<std::size_t>> subsets;
    std::vector<std::size_t> cur;
    all_subsets(n, k, 0, cur, subsets);
    CHECK(subsets.size() == 20);
    for (const auto& s : subsets) {
        std::vector<Packet> chosen;
        std::vector<StripedPacket> chosen_striped;
        for (auto i : s) {
            chosen.push_back(pk[i]);
            chosen_striped.push_back(striped[i]);
        }
        CHECK(decode_strings(chosen, f) == u);
        CHECK(decode_striped(chosen_striped, k, t) == bytes);
    }
}

TEST_CASE("byte codec with length header")
{
    // t=8, k=4: three data strings hold 3 bytes
    const std::vector<std::uint8_t> in = {'a', 'b', 'c'};
    auto pk = encode(in, 10, 4, 8);
    CHECK(decode({pk[9], pk[2], pk[5], pk[0]}, 4, 8) == in);
    try {
        encode({'a', 'b', 'c', 'd'}, 10, 4, 8);
        FAIL("expected a capacity error");
    } catch (const CapacityError& e) {
        CHECK(e.required_k() == 5);
    }
    auto empty = encode({}, 5, 2, 3);
    CHECK(decode({empty[3], empty[1]}, 2, 3).empty());
    CHECK_THROWS_AS(decode({pk[0], pk[1]}, 4, 8), InputError);
}

TEST_CASE("striped codec: random subsets restore the bytes exactly")
{
    std::mt19937_64 rng(21);
    for (std::size_t n : {2u, 5u, 16u, 33u, 64u}) {
        const int t = field_exponent(n);
        const std::size_t k = input_string_count(0.3, n);
        std::vector<std::uint8_t> in(rng() % 300);
        for (auto& b : in) b = static_cast<std::uint8_t>(rng());
        auto pk = encode_striped(in, n, k, t);
        CHECK(pk.size() == n);
        for (int trial = 0; trial < 200; ++trial) {
            std::vector<std::size_t> idx(n);
            for (std::size_t i = 0; i < n; ++i) idx[i] = i;
            std::shuffle(idx.begin(), idx.end(), rng);
            std::vector<StripedPacket> chosen;
            for (std::size_t i = 0; i < k; ++i) chosen.push_back(pk[idx[i]]);
            CHECK(decode_striped(chosen, k, t) == in);
        }
    }
}

TEST_CASE("packet JSON round trip")
{
    PacketFile f{4, 2, 3, encode_striped({1, 2, 3}, 4, 2, 3)};
    auto back = packets_from_json(packets_to_json(f));
    CHECK(back.n == 4);
    CHECK(back.k == 2);
    CHECK(back.t == 3);
    CHECK(back.packets == f.packets);
    auto scalar = packets_from_json(R"({"n":3,"k":2,"t":3,"packets":[{"id":1,"value":3}]})");
    CHECK(scalar.packets[0].values == std::vector<Elem>{3});
    CHECK_THROWS_AS(packets_from_json("{}"), InputError);
}

TEST_CASE("decode charge grows with log squared")
{
    CHECK(decode_charge(16) == 16);
    CHECK(decode_charge(256) == 64);
    CHECK(decode_charge(1) == 1);
}
