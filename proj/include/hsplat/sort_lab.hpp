#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace hsplat {

struct SortStrategy {
    enum class Kind { global, lazy, local };
    Kind kind = Kind::global;
    std::uint32_t period = 10;             // lazy: frames between full sorts
    std::size_t partition_size = 65536;    // local

    // "global", "lazy:<period>", "local:<size>"; bare "lazy"/"local" take
    // the defaults.
    static SortStrategy parse(std::string_view token);
    std::string token() const;

    friend bool operator==(const SortStrategy&, const SortStrategy&) = default;
};

// Stale ordering carried across frames. `order` holds splat origins
// (model_id << 32 | gaussian_index) in the order of the last full sort.
struct LazySortState {
    std::uint32_t period = 10;
    std::uint64_t frame = 0;
    std::vector<std::uint64_t> order;

    void reset() {
        frame = 0;
        order.clear();
    }
};

// Full radix sort every `period` frames; otherwise the stale order filtered
// to the current population, with new splats appended in input order.
std::vector<std::uint32_t> lazy_sort_step(LazySortState& state, std::span<const std::uint32_t> keys,
                                          std::span<const std::uint64_t> origins);

// Each consecutive run of partition_size entries sorted on its own,
// partitions kept in input order.
std::vector<std::uint32_t> local_sort(std::span<const std::uint32_t> keys, std::size_t partition_size);

// Pairs i < j with keys[perm[i]] > keys[perm[j]], by merge counting.
std::uint64_t count_inversions(std::span<const std::uint32_t> perm, std::span<const std::uint32_t> keys);

}  // namespace hsplat
