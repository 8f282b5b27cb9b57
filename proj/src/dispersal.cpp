#include "ftpram/dispersal.hpp"

#include "json.hpp"

#include <cmath>
#include <set>

namespace ftpram {

namespace {

// LSB-first bit packing of bytes into t-bit symbols.
std::vector<Elem> pack_symbols(const std::vector<std::uint8_t>& bytes, int t)
{
    std::vector<Elem> out;
    std::uint64_t acc = 0;
    int have = 0;
    for (std::uint8_t b : bytes) {
        acc |= std::uint64_t{b} << have;
        have += 8;
        while (have >= t) {
            out.push_back(static_cast<Elem>(acc & ((std::uint64_t{1} << t) - 1)));
            acc >>= t;
            have -= t;
        }
    }
    if (have > 0) out.push_back(static_cast<Elem>(acc));
    return out;
}

std::vector<std::uint8_t> unpack_symbols(const std::vector<Elem>& symbols, int t, std::size_t byte_count)
{
    std::vector<std::uint8_t> out;
    out.reserve(byte_count);
    std::uint64_t acc = 0;
    int have = 0;
    for (Elem s : symbols) {
        if (out.size() == byte_count) break;
        acc |= std::uint64_t{s} << have;
        have += t;
        while (have >= 8 && out.size() < byte_count) {
            out.push_back(static_cast<std::uint8_t>(acc & 0xffu));
            acc >>= 8;
            have -= 8;
        }
    }
    if (out.size() != byte_count) throw InputError("packets carry fewer bytes than their length header");
    return out;
}

std::size_t ceil_div(std::size_t a, std::size_t b) { return (a + b - 1) / b; }

void check_ids(const std::vector<std::uint32_t>& ids)
{
    std::set<std::uint32_t> seen;
    for (auto id : ids) {
        if (id == 0) throw InputError("packet id 0");
        if (!seen.insert(id).second) throw InputError("duplicate packet id " + std::to_string(id));
    }
}

}  // namespace

std::vector<Packet> encode_strings(const std::vector<Elem>& u, std::size_t n, const Field& f)
{
    const Elem w = f.primitive();
    std::vector<Packet> out;
    out.reserve(n);
    Elem x = 1;
    for (std::size_t i = 1; i <= n; ++i) {
        x = f.mul(x, w);
        Elem v = 0;
        for (auto it = u.rbegin(); it != u.rend(); ++it) v = f.add(f.mul(v, x), *it);
        out.push_back(Packet{static_cast<std::uint32_t>(i), v});
    }
    return out;
}

std::vector<Elem> decode_strings(const std::vector<Packet>& packets, const Field& f)
{
    const std::size_t k = packets.size();
    std::vector<std::uint32_t> ids;
    for (const auto& p : packets) ids.push_back(p.id);
    check_ids(ids);
    if (k == 0) return {};

    std::vector<Elem> xs(k);
    for (std::size_t i = 0; i < k; ++i) xs[i] = f.pow(f.primitive(), packets[i].id);
    // M(x) = prod (x + x_i), coefficients low to high
    std::vector<Elem> master{1};
    for (Elem xi : xs) {
        std::vector<Elem> next(master.size() + 1, 0);
        for (std::size_t j = 0; j < master.size(); ++j) {
            next[j + 1] = f.add(next[j + 1], master[j]);
            next[j] = f.add(next[j], f.mul(master[j], xi));
        }
        master = std::move(next);
    }

    std::vector<Elem> coef(k, 0);
    std::vector<Elem> q(k);
    for (std::size_t i = 0; i < k; ++i) {
        // q = M / (x + x_i)
        q[k - 1] = master[k];
        for (std::size_t j = k - 1; j > 0; --j) q[j - 1] = f.add(master[j], f.mul(xs[i], q[j]));
        Elem denom = 0;
        for (std::size_t j = k; j-- > 0;) denom = f.add(f.mul(denom, xs[i]), q[j]);
        if (denom == 0) throw InputError("packets share an evaluation point");
        const Elem scale = f.div(packets[i].value, denom);
        for (std::size_t j = 0; j < k; ++j) coef[j] = f.add(coef[j], f.mul(scale, q[j]));
    }
    return coef;
}

std::vector<Elem> bytes_to_strings(const std::vector<std::uint8_t>& bytes, std::size_t k, int t)
{
    const std::size_t bits = bytes.size() * 8;
    const std::size_t need = 1 + ceil_div(bits, static_cast<std::size_t>(t));
    if (static_cast<std::uint64_t>(bytes.size()) >= (std::uint64_t{1} << t))
        throw CapacityError("byte count does not fit the length header of t=" + std::to_string(t) + " bits", need);
    if (k == 0 || bits > (k - 1) * static_cast<std::size_t>(t))
        throw CapacityError("input of " + std::to_string(bytes.size()) + " bytes needs k >= " + std::to_string(need),
                            need);
    std::vector<Elem> u(k, 0);
    u[0] = static_cast<Elem>(bytes.size());
    auto sym = pack_symbols(bytes, t);
    std::copy(sym.begin(), sym.end(), u.begin() + 1);
    return u;
}

std::vector<std::uint8_t> strings_to_bytes(const std::vector<Elem>& u, int t)
{
    if (u.empty()) throw InputError("no strings");
    const std::size_t len = u[0];
    if (len * 8 > (u.size() - 1) * static_cast<std::size_t>(t)) throw InputError("length header exceeds capacity");
    return unpack_symbols(std::vector<Elem>(u.begin() + 1, u.end()), t, len);
}

std::vector<Packet> encode(const std::vector<std::uint8_t>& bytes, std::size_t n, std::size_t k, int t)
{
    Field f(t);
    return encode_strings(bytes_to_strings(bytes, k, t), n, f);
}

std::vector<std::uint8_t> decode(const std::vector<Packet>& packets, std::size_t k, int t)
{
    if (packets.size() != k) throw InputError("decode needs exactly k packets");
    Field f(t);
    return strings_to_bytes(decode_strings(packets, f), t);
}

std::vector<StripedPacket> encode_striped(const std::vector<std::uint8_t>& bytes, std::size_t n, std::size_t k,
                                          int t)
{
    if (k == 0) throw CapacityError("k must be positive", 1);
    if (n >= (std::uint64_t{1} << t)) throw InputError("n must be below 2^t for distinct evaluation points");
    Field f(t);
    std::vector<std::uint8_t> framed(8);
    std::uint64_t len = bytes.size();
    for (int i = 0; i < 8; ++i) framed[static_cast<std::size_t>(i)] = static_cast<std::uint8_t>(len >> (8 * i));
    framed.insert(framed.end(), bytes.begin(), bytes.end());
    auto sym = pack_symbols(framed, t);
    sym.resize(ceil_div(sym.size(), k) * k, 0);

    std::vector<StripedPacket> out(n);
    for (std::size_t i = 0; i < n; ++i) out[i].id = static_cast<std::uint32_t>(i + 1);
    for (std::size_t s = 0; s < sym.size(); s += k) {
        std::vector<Elem> u(sym.begin() + static_cast<std::ptrdiff_t>(s),
                            sym.begin() + static_cast<std::ptrdiff_t>(s + k));
        auto pk = encode_strings(u, n, f);
        for (std::size_t i = 0; i < n; ++i) out[i].values.push_back(pk[i].value);
    }
    return out;
}

std::vector<std::uint8_t> decode_striped(const std::vector<StripedPacket>& packets, std::size_t k, int t)
{
    if (packets.size() != k) throw InputError("decode needs exactly k packets");
    if (k == 0) throw InputError("k must be positive");
    Field f(t);
    const std::size_t stripes = packets.front().values.size();
    for (const auto& p : packets)
        if (p.values.size() != stripes) throw InputError("packets disagree on the stripe count");
    std::vector<Elem> sym;
    sym.reserve(stripes * k);
    for (std::size_t s = 0; s < stripes; ++s) {
        std::vector<Packet> pk;
        for (const auto& p : packets) pk.push_back(Packet{p.id, p.values[s]});
        auto u = decode_strings(pk, f);
        sym.insert(sym.end(), u.begin(), u.end());
    }
    auto head = unpack_symbols(sym, t, 8);
    std::uint64_t len = 0;
    for (int i = 0; i < 8; ++i) len |= std::uint64_t{head[static_cast<std::size_t>(i)]} << (8 * i);
    if (len > sym.size() * static_cast<std::size_t>(t) / 8) throw InputError("length header exceeds capacity");
    auto all = unpack_symbols(sym, t, 8 + len);
    return std::vector<std::uint8_t>(all.begin() + 8, all.end());
}

std::string packets_to_json(const PacketFile& file)
{
    nlohmann::ordered_json j;
    j["n"] = file.n;
    j["k"] = file.k;
    j["t"] = file.t;
    j["packets"] = nlohmann::ordered_json::array();
    for (const auto& p : file.packets) {
        nlohmann::ordered_json e;
        e["id"] = p.id;
        e["value"] = p.values;
        j["packets"].push_back(e);
    }
    return j.dump(1);
}

PacketFile packets_from_json(const std::string& text)
{
    PacketFile file;
    try {
        auto j = nlohmann::json::parse(text);
        file.n = j.at("n").get<std::size_t>();
        file.k = j.at("k").get<std::size_t>();
        file.t = j.at("t").get<int>();
        for (const auto& e : j.at("packets")) {
            StripedPacket p;
            p.id = e.at("id").get<std::uint32_t>();
            if (e.at("value").is_array())
                p.values = e.at("value").get<std::vector<Elem>>();
            else
                p.values = {e.at("value").get<Elem>()};
            file.packets.push_back(std::move(p));
        }
    } catch (const nlohmann::json::exception& e) {
        throw InputError(std::string("malformed packet file: ") + e.what());
    }
    return file;
}

void deliver_packets(FaultyMachine& machine, const std::vector<StripedPacket>& packets)
{
    for (const auto& p : packets) {
        if (p.id == 0 || p.id > machine.n()) throw InputError("packet id outside the machine");
        if (!machine.processor_ok(p.id)) continue;
        auto& mem = machine.local(p.id);
        mem[local_key::packet_id] = p.id;
        mem[local_key::packet_stripes] = p.values.size();
        for (std::size_t s = 0; s < p.values.size(); ++s) mem[local_key::packet_value + s] = p.values[s];
    }
}

std::uint64_t decode_charge(std::size_t n)
{
    const double lg = n > 1 ? std::log2(static_cast<double>(n)) : 1.0;
    const double c = std::ceil(kDecodeCost * lg * lg - 1e-9);
    return std::max<std::uint64_t>(1, static_cast<std::uint64_t>(c));
}

RetrieveResult stage7_retrieve(FaultyMachine& machine, const MemoryMap& map, const SimulationParams& params)
{
    if (map.active.size() < params.k)
        throw std::runtime_error("only " + std::to_string(map.active.size()) + " active processors, " +
                                 std::to_string(params.k) + " packets needed");
    RetrieveResult res;
    std::vector<StripedPacket> held;
    for (std::size_t rank = 0; rank < params.k; ++rank) {
        const ProcId p = map.active[rank];
        const auto& mem = machine.local(p);
        auto id = mem.find(local_key::packet_id);
        if (id == mem.end()) throw std::runtime_error("active processor " + std::to_string(p) + " holds no packet");
        StripedPacket sp;
        sp.id = static_cast<std::uint32_t>(id->second);
        const std::size_t stripes = mem.at(local_key::packet_stripes);
        for (std::size_t s = 0; s < stripes; ++s)
            sp.values.push_back(static_cast<Elem>(mem.at(local_key::packet_value + s)));
        held.push_back(std::move(sp));
        res.contributors.push_back(p);
    }
    res.input = decode_striped(held, params.k, params.t);
    res.rounds = decode_charge(params.n);
    machine.idle(res.rounds);
    for (ProcId p : res.contributors) {
        auto& mem = machine.local(p);
        mem[local_key::input_length] = res.input.size();
        for (std::size_t i = 0; i < res.input.size(); ++i) mem[local_key::input_byte + i] = res.input[i];
    }
    return res;
}

}  // namespace ftpram
