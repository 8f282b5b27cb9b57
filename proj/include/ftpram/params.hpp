#pragma once

#include "ftpram/layout.hpp"

#include <cstddef>
#include <string>
#include <vector>

namespace ftpram {

/// Constants that make a faulty machine "normal": the segment geometry
/// (alpha, beta), the guaranteed active fraction gamma, the good-segment
/// density delta and the dispersal field exponent t.
struct SimulationParams {
    double fp = 0.0;
    double fs = 0.0;
    int beta = 0;
    int alpha = 0;
    double gamma = 0.0;
    double delta = 0.0;
    int t = 0;
    std::size_t k = 0;  // input strings, ceil(gamma * n)
    std::size_t n = 0;
    std::size_t m = 0;
};

class ParameterError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Smallest beta whose segments hold every structural role of either kind
/// plus one virtual-storage unit; never below 2.
int minimum_beta(const SegmentLayout& layout);

/// The dormant-fraction bound  fp + fs * alpha/(alpha-beta+1) * m/(m-n).
double dormant_bound(double fp, double fs, int alpha, int beta, double m_over_m_minus_n);

/// Smallest alpha with alpha >= beta, alpha > (beta-1)/(1-fs) and
/// dormant_bound(...) < (fp+fs+1)/2 for the given m and n (m > n).
int choose_alpha(double fp, double fs, int beta, std::size_t n, std::size_t m);

/// Same search when m scales with alpha as m = multiple * alpha * n, which
/// makes m/(m-n) = multiple*alpha / (multiple*alpha - 1).
int choose_alpha_scaled(double fp, double fs, int beta, double multiple);

/// delta = (1/alpha) * (1 - fs - fs*(beta-1)/(alpha-beta+1)).
/// Throws ParameterError unless alpha > (beta-1)/(1-fs).
double compute_delta(double fs, int alpha, int beta);

/// Smallest t with 2^t >= n + 1.
int field_exponent(std::size_t n);

/// ceil(gamma * n), robust to floating-point noise.
std::size_t input_string_count(double gamma, std::size_t n);

/// Lists every violated normality condition; empty means normal.
std::vector<std::string> validate_normal(const SimulationParams& p);

/// Also checks the fault counts of a concrete pattern against fp*n and fs*m.
std::vector<std::string> validate_normal(const SimulationParams& p, std::size_t faulty_processors,
                                         std::size_t faulty_cells);

/// Derives alpha (for the given m), delta, gamma, k and t. beta defaults to
/// the standard layout's minimum. Fractions outside [0,1) or fp+fs >= 1
/// leave the dependent fields zero; validate_normal reports them.
SimulationParams derive_params(double fp, double fs, std::size_t n, std::size_t m, int beta = 0);

/// Derives parameters with m = multiple * alpha * n.
SimulationParams derive_params_scaled(double fp, double fs, std::size_t n, double multiple, int beta = 0);

std::string params_to_json(const SimulationParams& p, const std::vector<std::string>& violations);

}  // namespace ftpram
