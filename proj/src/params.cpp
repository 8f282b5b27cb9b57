#include "ftpram/params.hpp"

#include "json.hpp"

#include <bit>
#include <cmath>

namespace ftpram {

namespace {
constexpr int kAlphaSearchLimit = 1 << 20;

bool fractions_valid(double fp, double fs)
{
    return fp >= 0 && fs >= 0 && fp < 1 && fs < 1 && fp + fs < 1;
}

bool alpha_ok(double fp, double fs, int alpha, int beta, double ratio)
{
    if (alpha < beta) return false;
    if (!(alpha > (beta - 1) / (1.0 - fs))) return false;
    return dormant_bound(fp, fs, alpha, beta, ratio) < (fp + fs + 1.0) / 2.0;
}
}  // namespace

int minimum_beta(const SegmentLayout& layout)
{
    const int structural = std::max(layout.contact_structural(), layout.regular_structural());
    const int total = structural + layout.cells_per_virtual;
    return std::max(total, 2);
}

double dormant_bound(double fp, double fs, int alpha, int beta, double ratio)
{
    return fp + fs * (static_cast<double>(alpha) / (alpha - beta + 1)) * ratio;
}

int choose_alpha(double fp, double fs, int beta, std::size_t n, std::size_t m)
{
    if (!fractions_valid(fp, fs)) throw ParameterError("f_p+f_s<1 violated or fraction outside [0,1)");
    if (beta < 2) throw ParameterError("beta>1 violated");
    if (m <= n) throw ParameterError("choose_alpha needs m > n");
    const double ratio = static_cast<double>(m) / static_cast<double>(m - n);
    for (int alpha = beta; alpha < kAlphaSearchLimit; ++alpha)
        if (alpha_ok(fp, fs, alpha, beta, ratio)) return alpha;
    throw ParameterError("no alpha satisfies the active-fraction inequality for this m/n");
}

int choose_alpha_scaled(double fp, double fs, int beta, double multiple)
{
    if (!fractions_valid(fp, fs)) throw ParameterError("f_p+f_s<1 violated or fraction outside [0,1)");
    if (beta < 2) throw ParameterError("beta>1 violated");
    for (int alpha = beta; alpha < kAlphaSearchLimit; ++alpha) {
        const double ma = multiple * alpha;
        if (ma <= 1.0) continue;
        if (alpha_ok(fp, fs, alpha, beta, ma / (ma - 1.0))) return alpha;
    }
    throw ParameterError("no alpha satisfies the active-fraction inequality");
}

double compute_delta(double fs, int alpha, int beta)
{
    if (!(fs >= 0 && fs < 1)) throw ParameterError("f_s must lie in [0,1)");
    if (!(alpha > (beta - 1) / (1.0 - fs)))
        throw ParameterError("alpha>(beta-1)/(1-f_s) violated: alpha=" + std::to_string(alpha));
    const double d = (1.0 / alpha) * (1.0 - fs - fs * (beta - 1.0) / (alpha - beta + 1.0));
    if (!(d > 0)) throw ParameterError("delta is not positive");
    return d;
}

int field_exponent(std::size_t n)
{
    return static_cast<int>(std::bit_width(n));
}

std::size_t input_string_count(double gamma, std::size_t n)
{
    return static_cast<std::size_t>(std::ceil(gamma * static_cast<double>(n) - 1e-9));
}

std::vector<std::string> validate_normal(const SimulationParams& p)
{
    std::vector<std::string> v;
    if (!(p.fp >= 0 && p.fp < 1)) v.push_back("0<=f_p<1");
    if (!(p.fs >= 0 && p.fs < 1)) v.push_back("0<=f_s<1");
    if (!(p.fp + p.fs < 1)) v.push_back("f_p+f_s<1");
    if (p.beta <= 1) v.push_back("beta>1");
    if (p.alpha < p.beta) v.push_back("alpha>=beta");
    if (p.fs < 1 && !(p.alpha > (p.beta - 1) / (1.0 - p.fs))) v.push_back("alpha>(beta-1)/(1-f_s)");
    if (p.m <= p.n) {
        v.push_back("m>n");
    } else if (p.alpha >= p.beta && p.alpha > p.beta - 1) {
        const double ratio = static_cast<double>(p.m) / static_cast<double>(p.m - p.n);
        if (!(dormant_bound(p.fp, p.fs, p.alpha, p.beta, ratio) < (p.fp + p.fs + 1.0) / 2.0))
            v.push_back("f_p+f_s*alpha/(alpha-beta+1)*m/(m-n)<(f_p+f_s+1)/2");
    }
    if (p.m < static_cast<std::size_t>(p.alpha) * p.n) v.push_back("m>=alpha*n");
    if (!(p.delta > 0) || static_cast<double>(p.m) < 1.0 / p.delta) v.push_back("m>=1/delta");
    if (p.t < 1 || p.t > 32 || (std::uint64_t{1} << p.t) < p.n + 1) v.push_back("2^t>=n+1 with t<=32");
    if (p.alpha > 256) v.push_back("alpha<=256 (packed segment references)");
    if (p.m >= 0xffffffffu) v.push_back("m<2^32-1 (packed addresses)");
    return v;
}

std::vector<std::string> validate_normal(const SimulationParams& p, std::size_t faulty_processors,
                                         std::size_t faulty_cells)
{
    auto v = validate_normal(p);
    if (static_cast<double>(faulty_processors) > p.fp * static_cast<double>(p.n) + 1e-9)
        v.push_back("faulty processors<=f_p*n");
    if (static_cast<double>(faulty_cells) > p.fs * static_cast<double>(p.m) + 1e-9)
        v.push_back("faulty cells<=f_s*m");
    return v;
}

namespace {

void fill_dependent(SimulationParams& p)
{
    p.t = field_exponent(p.n);
    if (!fractions_valid(p.fp, p.fs)) return;
    p.gamma = (1.0 - (p.fp + p.fs)) / 2.0;
    p.k = input_string_count(p.gamma, p.n);
    try {
        p.delta = compute_delta(p.fs, p.alpha, p.beta);
    } catch (const ParameterError&) {
        p.delta = 0;
    }
}

}  // namespace

SimulationParams derive_params(double fp, double fs, std::size_t n, std::size_t m, int beta)
{
    SimulationParams p;
    p.fp = fp;
    p.fs = fs;
    p.n = n;
    p.m = m;
    p.beta = beta > 0 ? beta : minimum_beta(SegmentLayout::standard());
    if (fractions_valid(fp, fs) && m > n) {
        try {
            p.alpha = choose_alpha(fp, fs, p.beta, n, m);
        } catch (const ParameterError&) {
            p.alpha = 0;
        }
    }
    fill_dependent(p);
    return p;
}

SimulationParams derive_params_scaled(double fp, double fs, std::size_t n, double multiple, int beta)
{
    SimulationParams p;
    p.fp = fp;
    p.fs = fs;
    p.n = n;
    p.beta = beta > 0 ? beta : minimum_beta(SegmentLayout::standard());
    p.alpha = choose_alpha_scaled(fp, fs, p.beta, multiple);
    p.m = static_cast<std::size_t>(std::llround(multiple * p.alpha * static_cast<double>(n)));
    fill_dependent(p);
    return p;
}

std::string params_to_json(const SimulationParams& p, const std::vector<std::string>& violations)
{
    nlohmann::ordered_json j;
    j["f_p"] = p.fp;
    j["f_s"] = p.fs;
    j["n"] = p.n;
    j["m"] = p.m;
    j["alpha"] = p.alpha;
    j["beta"] = p.beta;
    j["gamma"] = p.gamma;
    j["delta"] = p.delta;
    j["t"] = p.t;
    j["k"] = p.k;
    j["normal"] = violations.empty();
    j["violations"] = violations;
    return j.dump(2);
}

}  // namespace ftpram
