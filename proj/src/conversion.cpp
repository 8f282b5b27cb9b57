#include "ftpram/conversion.hpp"

#include <algorithm>
#include <stdexcept>

namespace ftpram {

ConversionPlan convert_list_to_tree(std::size_t length)
{
    if (length == 0) throw std::invalid_argument("conversion of an empty list");
    ConversionPlan plan;
    plan.left.assign(length, kNoNode);
    plan.right.assign(length, kNoNode);
    plan.parent.assign(length, kNoNode);

    std::vector<std::size_t> list(length);
    for (std::size_t i = 0; i < length; ++i) list[i] = i;

    while (list.size() > 1) {
        plan.phase_lists.push_back(list);
        std::vector<std::size_t> next;
        std::vector<Join> joins;
        for (std::size_t q = 0; q < list.size(); q += 4) {
            const std::size_t t1 = list[q];
            if (q + 1 >= list.size()) {
                next.push_back(t1);  // a lone trailing tree waits for the next phase
                continue;
            }
            const std::size_t v1 = list[q + 1];
            const std::size_t t2 = q + 2 < list.size() ? list[q + 2] : kNoNode;
            Join j{v1, t1, t2};
            plan.left[v1] = t1;
            plan.parent[t1] = v1;
            if (t2 != kNoNode) {
                plan.right[v1] = t2;
                plan.parent[t2] = v1;
            }
            joins.push_back(j);
            next.push_back(v1);
            if (q + 3 < list.size()) next.push_back(list[q + 3]);
        }
        plan.phases.push_back(std::move(joins));
        list = std::move(next);
    }
    plan.root = list.front();
    return plan;
}

std::vector<int> ConversionPlan::depths() const
{
    std::vector<int> d(size(), 0);
    std::vector<std::size_t> stack{root};
    while (!stack.empty()) {
        std::size_t v = stack.back();
        stack.pop_back();
        for (std::size_t c : {left[v], right[v]}) {
            if (c == kNoNode) continue;
            d[c] = d[v] + 1;
            stack.push_back(c);
        }
    }
    return d;
}

int ConversionPlan::height() const
{
    auto d = depths();
    return d.empty() ? 0 : *std::max_element(d.begin(), d.end());
}

std::vector<std::size_t> ConversionPlan::in_order() const
{
    std::vector<std::size_t> out;
    std::vector<std::size_t> stack;
    std::size_t cur = root;
    while (cur != kNoNode || !stack.empty()) {
        while (cur != kNoNode) {
            stack.push_back(cur);
            cur = left[cur];
        }
        cur = stack.back();
        stack.pop_back();
        out.push_back(cur);
        cur = right[cur];
    }
    return out;
}

}  // namespace ftpram
