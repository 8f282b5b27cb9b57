#include "ftpram/faults.hpp"

#include "json.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace ftpram {

std::string to_string(FaultKind k)
{
    switch (k) {
    case FaultKind::explicit_list: return "explicit";
    case FaultKind::random: return "random";
    case FaultKind::block_cluster: return "block_cluster";
    case FaultKind::prefix: return "prefix";
    case FaultKind::stride: return "stride";
    }
    return "?";
}

std::uint64_t DeterministicRng::below(std::uint64_t bound)
{
    if (bound == 0) throw std::invalid_argument("below(0)");
    const std::uint64_t limit = ~std::uint64_t{0} - (~std::uint64_t{0} % bound);
    std::uint64_t x;
    do {
        x = next();
    } while (x >= limit);
    return x % bound;
}

namespace {

std::size_t budget(double fraction, std::size_t total)
{
    return static_cast<std::size_t>(std::floor(fraction * static_cast<double>(total) + 1e-9));
}

// First `count` entries of a seeded Fisher-Yates permutation of [0,total).
std::vector<std::size_t> sample(DeterministicRng& rng, std::size_t total, std::size_t count)
{
    std::vector<std::size_t> idx(total);
    std::iota(idx.begin(), idx.end(), 0);
    for (std::size_t i = 0; i < count && i < total; ++i) {
        std::size_t j = i + rng.below(total - i);
        std::swap(idx[i], idx[j]);
    }
    idx.resize(std::min(count, total));
    return idx;
}

std::vector<std::size_t> spread(std::size_t total, std::size_t count)
{
    std::vector<std::size_t> out;
    for (std::size_t j = 0; j < count; ++j) out.push_back(j * total / count);
    return out;
}

}  // namespace

FaultPattern generate_pattern(const FaultSpec& spec, std::size_t n, std::size_t m, std::size_t alpha, std::size_t beta)
{
    if (spec.kind == FaultKind::explicit_list) return spec.pattern;
    if (spec.fp < 0 || spec.fs < 0 || spec.fp >= 1 || spec.fs >= 1)
        throw std::invalid_argument("fault fractions must lie in [0,1)");
    const std::size_t proc_faults = budget(spec.fp, n);
    const std::size_t cell_faults = budget(spec.fs, m);
    FaultPattern p;
    DeterministicRng rng(spec.seed);

    switch (spec.kind) {
    case FaultKind::random: {
        for (std::size_t i : sample(rng, n, proc_faults)) p.faulty_processors.insert(static_cast<ProcId>(i + 1));
        for (std::size_t a : sample(rng, m, cell_faults)) p.faulty_cells.insert(a);
        break;
    }
    case FaultKind::prefix: {
        for (std::size_t i = 0; i < proc_faults; ++i) p.faulty_processors.insert(static_cast<ProcId>(i + 1));
        for (std::size_t a = 0; a < cell_faults; ++a) p.faulty_cells.insert(a);
        break;
    }
    case FaultKind::stride: {
        // A seed-dependent phase keeps different seeds distinct.
        const std::size_t shift_p = proc_faults ? rng.below(n) : 0;
        const std::size_t shift_c = cell_faults ? rng.below(m) : 0;
        for (std::size_t i : spread(n, proc_faults)) p.faulty_processors.insert(static_cast<ProcId>((i + shift_p) % n + 1));
        for (std::size_t a : spread(m, cell_faults)) p.faulty_cells.insert((a + shift_c) % m);
        break;
    }
    case FaultKind::block_cluster: {
        for (std::size_t i = 0; i < proc_faults; ++i) p.faulty_processors.insert(static_cast<ProcId>(n - i));
        const std::size_t block = m / n;
        const std::size_t keep = beta > 0 ? beta - 1 : 0;
        std::size_t left = cell_faults;
        // Blocks of operational processors, visited in a seed-rotated order.
        const std::size_t operational = n - proc_faults;
        const std::size_t rot = operational ? rng.below(operational) : 0;
        for (std::size_t v = 0; v < operational && left > 0; ++v) {
            const std::size_t b = (v + rot) % operational;
            for (std::size_t j = 0; j < block && left > 0; ++j) {
                if (j % alpha >= keep) {
                    p.faulty_cells.insert(b * block + j);
                    --left;
                }
            }
        }
        // Whatever budget remains lands on the blocks of faulty processors.
        for (std::size_t a = m; a-- > 0 && left > 0;) {
            if (p.faulty_cells.insert(a).second) --left;
        }
        break;
    }
    case FaultKind::explicit_list: break;
    }
    return p;
}

FaultSpec parse_fault_spec(const std::string& json_text)
{
    nlohmann::json j = nlohmann::json::parse(json_text);
    if (!j.is_object()) throw std::invalid_argument("fault spec must be a JSON object");
    FaultSpec s;
    if (j.contains("faulty_processors") || j.contains("faulty_cells")) {
        s.kind = FaultKind::explicit_list;
        for (auto& v : j.value("faulty_processors", nlohmann::json::array())) {
            if (!v.is_number_integer() || v.get<long long>() < 0)
                throw std::invalid_argument("faulty_processors entries must be non-negative integers");
            s.pattern.faulty_processors.insert(v.get<ProcId>());
        }
        for (auto& v : j.value("faulty_cells", nlohmann::json::array())) {
            if (!v.is_number_integer() || v.get<long long>() < 0)
                throw std::invalid_argument("faulty_cells entries must be non-negative integers");
            s.pattern.faulty_cells.insert(v.get<Address>());
        }
        s.fp = j.value("fp", 0.0);
        s.fs = j.value("fs", 0.0);
        return s;
    }
    const std::string kind = j.at("kind").get<std::string>();
    if (kind == "random") s.kind = FaultKind::random;
    else if (kind == "block_cluster") s.kind = FaultKind::block_cluster;
    else if (kind == "prefix") s.kind = FaultKind::prefix;
    else if (kind == "stride") s.kind = FaultKind::stride;
    else throw std::invalid_argument("unknown fault kind: " + kind);
    s.fp = j.at("fp").get<double>();
    s.fs = j.at("fs").get<double>();
    s.seed = j.value("seed", std::uint64_t{0});
    return s;
}

std::string fault_spec_to_json(const FaultSpec& spec)
{
    nlohmann::ordered_json j;
    if (spec.kind == FaultKind::explicit_list) {
        j["faulty_processors"] = spec.pattern.faulty_processors;
        j["faulty_cells"] = spec.pattern.faulty_cells;
    } else {
        j["kind"] = to_string(spec.kind);
        j["fp"] = spec.fp;
        j["fs"] = spec.fs;
        j["seed"] = spec.seed;
    }
    return j.dump();
}

std::pair<double, double> effective_fractions(const FaultSpec& spec, std::size_t n, std::size_t m)
{
    if (spec.kind != FaultKind::explicit_list) return {spec.fp, spec.fs};
    const double fp = static_cast<double>(spec.pattern.faulty_processors.size()) / static_cast<double>(n);
    const double fs = static_cast<double>(spec.pattern.faulty_cells.size()) / static_cast<double>(m);
    return {std::max(spec.fp, fp), std::max(spec.fs, fs)};
}

}  // namespace ftpram
