#ifndef RANDCLT_RANDOM_HPP
#define RANDCLT_RANDOM_HPP

#include <cstdint>
#include <random>

namespace randclt {

namespace detail {

constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept
{
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

} // namespace detail

/// A splittable, reproducible source of random engines.
///
/// A stream is just a 64-bit key. `split(i)` derives a child key by hashing
/// (key, i), so child i is the same no matter who asks for it or in which
/// order. Parallel consumers take one child per task index and the results
/// do not depend on the degree of parallelism.
class Stream {
public:
    using engine_type = std::mt19937_64;

    constexpr explicit Stream(std::uint64_t seed) noexcept
        : key_(detail::splitmix64(seed ^ 0x5851f42d4c957f2dULL)) {}

    constexpr Stream split(std::uint64_t index) const noexcept
    {
        Stream child(0);
        child.key_ = detail::splitmix64(key_ ^ detail::splitmix64(index + 0x632be59bd9b4e019ULL));
        return child;
    }

    engine_type engine() const
    {
        std::seed_seq seq{static_cast<std::uint32_t>(key_), static_cast<std::uint32_t>(key_ >> 32)};
        return engine_type(seq);
    }

    constexpr std::uint64_t key() const noexcept { return key_; }

private:
    std::uint64_t key_;
};

/// Well-known substream indices, so that unrelated consumers of one master
/// seed never collide.
namespace substream {
inline constexpr std::uint64_t theta = 1;
inline constexpr std::uint64_t pairs = 2;
inline constexpr std::uint64_t typical_mixture = 3;
inline constexpr std::uint64_t norms = 4;
} // namespace substream

/// Uniform double in the open interval (0,1).
template <class Engine>
double uniform_open01(Engine& eng)
{
    // 53 random bits, offset by half an ulp so neither end is reachable.
    return (static_cast<double>(eng() >> 11) + 0.5) * 0x1.0p-53;
}

} // namespace randclt

#endif
