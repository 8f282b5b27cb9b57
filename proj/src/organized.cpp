#include "ftpram/organized.hpp"

#include <algorithm>
#include <functional>
#include <map>
#include <stdexcept>

namespace ftpram {

std::string BinaryPath::str() const
{
    std::string s;
    for (int i = 0; i < length; ++i) s += static_cast<char>('0' + at(i));
    return s;
}

BinaryPath path_of_address(Address v, int depth)
{
    const std::uint64_t mask = depth >= 64 ? ~std::uint64_t{0} : (std::uint64_t{1} << depth) - 1;
    return BinaryPath{v & mask, depth};
}

BinaryPath common_prefix(const BinaryPath& a, const BinaryPath& b)
{
    int n = 0;
    const int lim = std::min(a.length, b.length);
    while (n < lim && a.at(n) == b.at(n)) ++n;
    return BinaryPath{n == 0 ? 0 : a.bits >> (a.length - n), n};
}

bool is_prefix(const BinaryPath& a, const BinaryPath& b)
{
    return a.length <= b.length && common_prefix(a, b).length == a.length;
}

bool path_less(const BinaryPath& x, const BinaryPath& y)
{
    const auto c = common_prefix(x, y);
    if (c.length == x.length) return x.length < y.length;
    if (c.length == y.length) return false;
    return x.at(c.length) == 0;
}

OrgTree OrgArena::leaf(std::size_t owner, Address address, std::size_t request)
{
    OrgNode n;
    n.leaf = true;
    n.owner = owner;
    n.leftmost = n.rightmost = address;
    n.path = path_of_address(address, depth_);
    n.request = request;
    nodes_.push_back(n);
    return OrgTree{static_cast<int>(nodes_.size() - 1), owner};
}

int OrgArena::make_internal(std::size_t owner, int left, int right)
{
    OrgNode n;
    n.leaf = false;
    n.owner = owner;
    n.left = left;
    n.right = right;
    n.leftmost = node(left).leftmost;
    n.rightmost = node(right).rightmost;
    n.path = common_prefix(node(left).path, node(right).path);
    nodes_.push_back(n);
    return static_cast<int>(nodes_.size() - 1);
}

int OrgArena::merge_rec(int x, int y, std::deque<std::size_t>& pool, std::vector<MergeCall>* log, int parent)
{
    const BinaryPath px = node(x).path, py = node(y).path;
    const BinaryPath c = common_prefix(px, py);
    int self = -1;
    auto note = [&](MergeCase k) {
        if (!log) return;
        log->push_back(MergeCall{k, c.length, px.length, py.length, parent});
        self = static_cast<int>(log->size() - 1);
    };
    auto take = [&] {
        if (pool.empty()) throw std::logic_error("organized merge ran out of records");
        auto o = pool.front();
        pool.pop_front();
        return o;
    };

    if (px == py) {
        if (node(x).leaf)
            throw std::invalid_argument("address " + std::to_string(node(x).leftmost) + " requested twice");
        note(MergeCase::equal);
        pool.push_back(node(x).owner);
        pool.push_back(node(y).owner);
        const int xl = node(x).left, xr = node(x).right, yl = node(y).left, yr = node(y).right;
        const int l = merge_rec(xl, yl, pool, log, self);
        const int r = merge_rec(xr, yr, pool, log, self);
        return make_internal(take(), l, r);
    }
    if (c.length == px.length || c.length == py.length) {
        // one root path is a proper prefix of the other
        note(MergeCase::prefix);
        const int shallow = c.length == px.length ? x : y;
        const int deep = shallow == x ? y : x;
        const BinaryPath pd = node(deep).path;
        pool.push_back(node(shallow).owner);
        const int sl = node(shallow).left, sr = node(shallow).right;
        if (pd.at(c.length) == 0) {
            const int l = merge_rec(deep, sl, pool, log, self);
            return make_internal(take(), l, sr);
        }
        const int r = merge_rec(sr, deep, pool, log, self);
        return make_internal(take(), sl, r);
    }
    note(MergeCase::incomparable);
    return path_less(px, py) ? make_internal(take(), x, y) : make_internal(take(), y, x);
}

OrgTree OrgArena::merge(const OrgTree& a, const OrgTree& b, std::vector<MergeCall>* log)
{
    if (a.empty()) return OrgTree{b.root, b.spare ? b.spare : a.spare};
    if (b.empty()) return OrgTree{a.root, a.spare ? a.spare : b.spare};
    std::deque<std::size_t> pool;
    if (a.spare) pool.push_back(*a.spare);
    if (b.spare) pool.push_back(*b.spare);
    const int root = merge_rec(a.root, b.root, pool, log, -1);
    OrgTree t{root, std::nullopt};
    if (!pool.empty()) t.spare = pool.front();
    return t;
}

std::vector<int> OrgArena::leaves(int root) const
{
    std::vector<int> out;
    if (root < 0) return out;
    std::vector<int> stack{root};
    while (!stack.empty()) {
        int v = stack.back();
        stack.pop_back();
        if (node(v).leaf) {
            out.push_back(v);
            continue;
        }
        stack.push_back(node(v).right);
        stack.push_back(node(v).left);
    }
    return out;
}

std::vector<std::string> check_organized(const OrgArena& arena, const OrgTree& tree)
{
    std::vector<std::string> bad;
    if (tree.empty()) return bad;
    const auto lv = arena.leaves(tree.root);
    for (std::size_t i = 1; i < lv.size(); ++i)
        if (arena.node(lv[i - 1]).leftmost >= arena.node(lv[i]).leftmost)
            bad.push_back("leaves out of order at position " + std::to_string(i));

    std::map<std::size_t, int> leaf_owned, internal_owned;
    std::function<void(int)> walk = [&](int v) {
        const auto& n = arena.node(v);
        if (n.leaf) {
            if (++leaf_owned[n.owner] > 1) bad.push_back("rank " + std::to_string(n.owner) + " owns two leaves");
            if (n.path != path_of_address(n.leftmost, arena.depth())) bad.push_back("leaf path mismatch");
            return;
        }
        if (++internal_owned[n.owner] > 1)
            bad.push_back("rank " + std::to_string(n.owner) + " owns two internal nodes");
        Address lo = ~Address{0}, hi = 0;
        for (int l : arena.leaves(v)) {
            lo = std::min(lo, arena.node(l).leftmost);
            hi = std::max(hi, arena.node(l).leftmost);
        }
        if (n.leftmost != lo || n.rightmost != hi) bad.push_back("leftmost/rightmost differ from subtree scan");
        const auto& L = arena.node(n.left);
        const auto& R = arena.node(n.right);
        if (n.path != common_prefix(L.path, R.path)) bad.push_back("node path is not the children's common prefix");
        if (L.path.length <= n.path.length || R.path.length <= n.path.length || L.path.at(n.path.length) != 0 ||
            R.path.at(n.path.length) != 1)
            bad.push_back("children do not diverge below their parent");
        walk(n.left);
        walk(n.right);
    };
    walk(tree.root);
    if (tree.spare && internal_owned.count(*tree.spare))
        bad.push_back("spare record of rank " + std::to_string(*tree.spare) + " is in use");
    if (!tree.spare && lv.size() > 0) bad.push_back("no spare record");
    return bad;
}

Construction construct_organized(OrgArena& arena, const std::vector<std::optional<Address>>& requests)
{
    const std::size_t leaves = requests.size();
    if (leaves == 0 || (leaves & (leaves - 1)) != 0)
        throw std::invalid_argument("organized construction needs a power-of-two leaf count");
    const int D = arena.depth();
    using Ready = std::vector<std::uint64_t>;  // per node depth, time its nodes are final

    Construction out;
    std::vector<OrgTree> level;
    std::vector<Ready> ready;
    for (std::size_t r = 0; r < leaves; ++r) {
        level.push_back(requests[r] ? arena.leaf(r, *requests[r], r) : arena.sentinel(r));
        ready.emplace_back(static_cast<std::size_t>(D) + 1, 0);
    }
    while (level.size() > 1) {
        std::vector<OrgTree> next;
        std::vector<Ready> next_ready;
        for (std::size_t i = 0; i + 1 < level.size(); i += 2) {
            std::vector<MergeCall> log;
            const bool real = !level[i].empty() && !level[i + 1].empty();
            next.push_back(arena.merge(level[i], level[i + 1], &log));
            Ready in(static_cast<std::size_t>(D) + 1);
            for (int d = 0; d <= D; ++d)
                in[static_cast<std::size_t>(d)] =
                    std::max(ready[i][static_cast<std::size_t>(d)], ready[i + 1][static_cast<std::size_t>(d)]);
            Ready res = in;
            std::vector<std::uint64_t> finish(log.size());
            for (std::size_t c = 0; c < log.size(); ++c) {
                const auto& call = log[c];
                std::uint64_t start = std::max(in[static_cast<std::size_t>(call.depth_a)],
                                               in[static_cast<std::size_t>(call.depth_b)]);
                if (call.parent >= 0) start = std::max(start, finish[static_cast<std::size_t>(call.parent)]);
                finish[c] = start + 1;
                auto& slot = res[static_cast<std::size_t>(call.depth)];
                slot = std::max(slot, finish[c]);
                ++out.calls[static_cast<int>(call.kind)];
            }
            for (std::size_t d = 1; d < res.size(); ++d) res[d] = std::max(res[d], res[d - 1]);
            if (real) ++out.merges;
            next_ready.push_back(std::move(res));
        }
        level = std::move(next);
        ready = std::move(next_ready);
    }
    out.tree = level.front();
    out.critical_path = ready.front().back();
    out.rounds = out.critical_path * kTaskRounds;
    return out;
}

}  // namespace ftpram
