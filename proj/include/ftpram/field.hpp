#pragma once

#include <cstdint>
#include <stdexcept>
#include <vector>

namespace ftpram {

using Elem = std::uint32_t;

class ArithmeticError : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

/// Modulus of GF(2^t) for 1 <= t <= 32, bit t included (t=3: x^3+x+1 = 0b1011).
std::uint64_t irreducible_polynomial(int t);

/// GF(2^t) in polynomial basis modulo irreducible_polynomial(t).
class Field {
public:
    explicit Field(int t);

    int t() const { return t_; }
    std::uint64_t order() const { return std::uint64_t{1} << t_; }
    std::uint64_t modulus() const { return modulus_; }

    Elem add(Elem a, Elem b) const { return a ^ b; }
    Elem mul(Elem a, Elem b) const;
    Elem pow(Elem a, std::uint64_t e) const;
    Elem inv(Elem a) const;
    Elem div(Elem a, Elem b) const { return mul(a, inv(b)); }

    /// Smallest element generating the multiplicative group.
    Elem primitive() const { return primitive_; }
    bool is_primitive(Elem g) const;

private:
    void check(Elem a) const;
    int t_;
    std::uint64_t modulus_;
    Elem primitive_ = 0;
};

/// Primitive element of GF(2^t); throws ArithmeticError for unsupported t.
Elem find_primitive(int t);

/// Distinct prime factors, used for the order test.
std::vector<std::uint64_t> prime_factors(std::uint64_t x);

}  // namespace ftpram
