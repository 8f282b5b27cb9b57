#pragma once

#include "ftpram/substrate.hpp"

#include <cstdint>
#include <optional>
#include <random>
#include <string>

namespace ftpram {

enum class FaultKind : std::uint8_t { explicit_list, random, block_cluster, prefix, stride };

std::string to_string(FaultKind k);

/// Fault specification as read from a fault file. Generated kinds draw
/// `floor(fp*n)` faulty processors and `floor(fs*m)` faulty cells.
struct FaultSpec {
    FaultKind kind = FaultKind::random;
    double fp = 0.0;
    double fs = 0.0;
    std::uint64_t seed = 0;
    FaultPattern pattern;  // explicit_list only
};

/// The single deterministic generator behind all fault randomness:
/// std::mt19937_64 seeded with the run seed. Bounded draws use rejection on
/// the raw 64-bit output so sequences do not depend on the standard library's
/// distribution implementations.
class DeterministicRng {
public:
    explicit DeterministicRng(std::uint64_t seed) : engine_(seed) {}
    std::uint64_t next() { return engine_(); }
    /// Uniform in [0, bound).
    std::uint64_t below(std::uint64_t bound);
    /// Uniform in [0, 1).
    double unit() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

private:
    std::mt19937_64 engine_;
};

/// Builds the concrete fault pattern. Adversarial kinds need the segment
/// geometry (alpha, beta) to place cell faults where they hurt most:
///  - block_cluster: faulty processors are the last ones; the cell budget kills
///    the blocks of operational processors from the front, leaving
///    beta-1 operational cells per alpha-window;
///  - prefix: the first processors and the first cells are faulty;
///  - stride: faults spread with a fixed period over processors and cells.
FaultPattern generate_pattern(const FaultSpec& spec, std::size_t n, std::size_t m, std::size_t alpha,
                              std::size_t beta);

/// Parses the fault-file JSON, either explicit
/// {"faulty_processors":[...],"faulty_cells":[...]} or generated
/// {"kind":"random"|"block_cluster"|"prefix"|"stride","fp":f,"fs":f,"seed":u}.
FaultSpec parse_fault_spec(const std::string& json_text);
std::string fault_spec_to_json(const FaultSpec& spec);

/// Fractions to validate a spec against: the declared ones for generated
/// kinds; for explicit lists the larger of declared and observed.
std::pair<double, double> effective_fractions(const FaultSpec& spec, std::size_t n, std::size_t m);

}  // namespace ftpram
