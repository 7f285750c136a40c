#include "hsplat/sort_lab.hpp"

#include <charconv>
#include <unordered_map>

#include "hsplat/error.hpp"
#include "hsplat/render.hpp"

namespace hsplat {

namespace {

std::uint64_t parse_positive(std::string_view text, std::string_view token) {
    std::uint64_t v = 0;
    const auto [end, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
    if (ec != std::errc{} || end != text.data() + text.size() || v == 0) {
        throw Error(ErrorCode::invalid_input, "bad sort strategy '" + std::string(token) + "'");
    }
    return v;
}

std::uint64_t merge_count(std::vector<std::uint32_t>& v, std::vector<std::uint32_t>& tmp, std::size_t lo,
                          std::size_t hi) {
    if (hi - lo < 2) {
        return 0;
    }
    const std::size_t mid = lo + (hi - lo) / 2;
    std::uint64_t count = merge_count(v, tmp, lo, mid) + merge_count(v, tmp, mid, hi);
    std::size_t i = lo, j = mid, k = lo;
    while (i < mid && j < hi) {
        if (v[j] < v[i]) {
            count += mid - i;
            tmp[k++] = v[j++];
        } else {
            tmp[k++] = v[i++];
        }
    }
    while (i < mid) {
        tmp[k++] = v[i++];
    }
    while (j < hi) {
        tmp[k++] = v[j++];
    }
    std::copy(tmp.begin() + static_cast<std::ptrdiff_t>(lo), tmp.begin() + static_cast<std::ptrdiff_t>(hi),
              v.begin() + static_cast<std::ptrdiff_t>(lo));
    return count;
}

}  // namespace

SortStrategy SortStrategy::parse(std::string_view token) {
    SortStrategy s;
    const auto colon = token.find(':');
    const std::string_view head = token.substr(0, colon);
    const bool has_arg = colon != std::string_view::npos;
    const std::string_view arg = has_arg ? token.substr(colon + 1) : std::string_view{};
    if (head == "global" && !has_arg) {
        s.kind = Kind::global;
    } else if (head == "lazy") {
        s.kind = Kind::lazy;
        if (has_arg) {
            const auto v = parse_positive(arg, token);
            if (v > 0xFFFFFFFFull) {
                throw Error(ErrorCode::invalid_input, "lazy period too large");
            }
            s.period = static_cast<std::uint32_t>(v);
        }
    } else if (head == "local") {
        s.kind = Kind::local;
        if (has_arg) {
            s.partition_size = parse_positive(arg, token);
        }
    } else {
        throw Error(ErrorCode::invalid_input, "bad sort strategy '" + std::string(token) + "'");
    }
    return s;
}

std::string SortStrategy::token() const {
    switch (kind) {
    case Kind::lazy: return "lazy:" + std::to_string(period);
    case Kind::local: return "local:" + std::to_string(partition_size);
    case Kind::global: break;
    }
    return "global";
}

std::vector<std::uint32_t> lazy_sort_step(LazySortState& state, std::span<const std::uint32_t> keys,
                                          std::span<const std::uint64_t> origins) {
    if (keys.size() != origins.size()) {
        throw Error(ErrorCode::invalid_input, "keys and origins differ in length");
    }
    const std::uint32_t period = std::max<std::uint32_t>(state.period, 1);
    const bool full = state.frame % period == 0;
    ++state.frame;
    if (full) {
        auto perm = radix_sort(keys);
        state.order.resize(perm.size());
        for (std::size_t i = 0; i < perm.size(); ++i) {
            state.order[i] = origins[perm[i]];
        }
        return perm;
    }

    std::unordered_map<std::uint64_t, std::uint32_t> current;
    current.reserve(origins.size());
    for (std::size_t i = 0; i < origins.size(); ++i) {
        current.emplace(origins[i], static_cast<std::uint32_t>(i));
    }
    std::vector<std::uint32_t> perm;
    perm.reserve(keys.size());
    std::vector<bool> placed(keys.size(), false);
    for (std::uint64_t o : state.order) {
        if (auto it = current.find(o); it != current.end() && !placed[it->second]) {
            placed[it->second] = true;
            perm.push_back(it->second);
        }
    }
    for (std::size_t i = 0; i < keys.size(); ++i) {
        if (!placed[i]) {
            perm.push_back(static_cast<std::uint32_t>(i));
        }
    }
    return perm;
}

std::vector<std::uint32_t> local_sort(std::span<const std::uint32_t> keys, std::size_t partition_size) {
    if (partition_size == 0) {
        throw Error(ErrorCode::invalid_input, "partition size must be >= 1");
    }
    std::vector<std::uint32_t> perm;
    perm.reserve(keys.size());
    for (std::size_t begin = 0; begin < keys.size(); begin += partition_size) {
        const std::size_t len = std::min(partition_size, keys.size() - begin);
        for (std::uint32_t local : radix_sort(keys.subspan(begin, len))) {
            perm.push_back(static_cast<std::uint32_t>(begin + local));
        }
    }
    return perm;
}

std::uint64_t count_inversions(std::span<const std::uint32_t> perm, std::span<const std::uint32_t> keys) {
    if (perm.size() != keys.size()) {
        throw Error(ErrorCode::invalid_input, "permutation length differs from key count");
    }
    std::vector<bool> seen(keys.size(), false);
    std::vector<std::uint32_t> v(perm.size());
    for (std::size_t i = 0; i < perm.size(); ++i) {
        if (perm[i] >= keys.size() || seen[perm[i]]) {
            throw Error(ErrorCode::invalid_input, "malformed permutation");
        }
        seen[perm[i]] = true;
        v[i] = keys[perm[i]];
    }
    std::vector<std::uint32_t> tmp(v.size());
    return merge_count(v, tmp, 0, v.size());
}

}  // namespace hsplat
