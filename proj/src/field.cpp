#include "ftpram/field.hpp"

#include <array>
#include <string>

namespace ftpram {

namespace {

// Low terms of x^t + ... for t = 1..32 (the x^t term is added below).
constexpr std::array<std::uint64_t, 33> kLowTerms = {
    0,
    0b1,                                  // 1: x+1
    0b11,                                 // 2: x^2+x+1
    0b11,                                 // 3: x^3+x+1
    0b11,                                 // 4: x^4+x+1
    0b101,                                // 5: x^5+x^2+1
    0b11,                                 // 6: x^6+x+1
    0b11,                                 // 7: x^7+x+1
    0b11011,                              // 8: x^8+x^4+x^3+x+1
    0b10001,                              // 9: x^9+x^4+1
    0b1001,                               // 10: x^10+x^3+1
    0b101,                                // 11: x^11+x^2+1
    0b1010011,                            // 12: x^12+x^6+x^4+x+1
    0b11011,                              // 13: x^13+x^4+x^3+x+1
    (1u << 10) | (1u << 6) | 0b11,        // 14: x^14+x^10+x^6+x+1
    0b11,                                 // 15: x^15+x+1
    (1u << 12) | (1u << 3) | 0b11,        // 16: x^16+x^12+x^3+x+1
    0b1001,                               // 17: x^17+x^3+1
    (1u << 7) | 1,                        // 18: x^18+x^7+1
    0b100111,                             // 19: x^19+x^5+x^2+x+1
    0b1001,                               // 20: x^20+x^3+1
    0b101,                                // 21: x^21+x^2+1
    0b11,                                 // 22: x^22+x+1
    0b100001,                             // 23: x^23+x^5+1
    (1u << 7) | 0b111,                    // 24: x^24+x^7+x^2+x+1
    0b1001,                               // 25: x^25+x^3+1
    (1u << 6) | 0b111,                    // 26: x^26+x^6+x^2+x+1
    0b100111,                             // 27: x^27+x^5+x^2+x+1
    0b1001,                               // 28: x^28+x^3+1
    0b101,                                // 29: x^29+x^2+1
    (1u << 23) | 0b111,                   // 30: x^30+x^23+x^2+x+1
    0b1001,                               // 31: x^31+x^3+1
    (1u << 22) | 0b111,                   // 32: x^32+x^22+x^2+x+1
};

}  // namespace

std::uint64_t irreducible_polynomial(int t)
{
    if (t < 1 || t > 32) throw ArithmeticError("no field table entry for t=" + std::to_string(t));
    return (std::uint64_t{1} << t) | kLowTerms[static_cast<std::size_t>(t)];
}

std::vector<std::uint64_t> prime_factors(std::uint64_t x)
{
    std::vector<std::uint64_t> f;
    for (std::uint64_t p = 2; p * p <= x; ++p) {
        if (x % p != 0) continue;
        f.push_back(p);
        while (x % p == 0) x /= p;
    }
    if (x > 1) f.push_back(x);
    return f;
}

Field::Field(int t) : t_(t), modulus_(irreducible_polynomial(t))
{
    for (std::uint64_t g = 1; g < order(); ++g)
        if (is_primitive(static_cast<Elem>(g))) {
            primitive_ = static_cast<Elem>(g);
            break;
        }
    if (primitive_ == 0) throw ArithmeticError("field table entry is not irreducible for t=" + std::to_string(t));
}

void Field::check(Elem a) const
{
    if (static_cast<std::uint64_t>(a) >= order())
        throw ArithmeticError("operand " + std::to_string(a) + " outside GF(2^" + std::to_string(t_) + ")");
}

Elem Field::mul(Elem a, Elem b) const
{
    check(a);
    check(b);
    std::uint64_t prod = 0;
    std::uint64_t x = a;
    for (std::uint32_t y = b; y != 0; y >>= 1, x <<= 1)
        if (y & 1u) prod ^= x;
    for (int bit = 2 * t_ - 2; bit >= t_; --bit)
        if (prod & (std::uint64_t{1} << bit)) prod ^= modulus_ << (bit - t_);
    return static_cast<Elem>(prod);
}

Elem Field::pow(Elem a, std::uint64_t e) const
{
    Elem result = 1, base = a;
    check(a);
    while (e != 0) {
        if (e & 1u) result = mul(result, base);
        base = mul(base, base);
        e >>= 1;
    }
    return result;
}

Elem Field::inv(Elem a) const
{
    check(a);
    if (a == 0) throw ArithmeticError("inverse of zero");
    return pow(a, order() - 2);
}

bool Field::is_primitive(Elem g) const
{
    if (g == 0 || static_cast<std::uint64_t>(g) >= order()) return false;
    const std::uint64_t group = order() - 1;
    if (pow(g, group) != 1) return false;
    for (std::uint64_t q : prime_factors(group))
        if (pow(g, group / q) == 1) return false;
    return true;
}

Elem find_primitive(int t) { return Field(t).primitive(); }

}  // namespace ftpram
