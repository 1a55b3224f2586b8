#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <utility>

#include <boost/random/normal_distribution.hpp>

namespace sqrtsde {

/// Philox4x32-10 counter-based generator.
///
/// Output block n is a pure function of (key, counter = n), so every path
/// gets its own stream by putting the path index in the upper counter words.
class Philox4x32 {
public:
    using result_type = std::uint32_t;
    using Block = std::array<std::uint32_t, 4>;

    Philox4x32(std::uint64_t seed, std::uint64_t stream)
        : key_{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)},
          ctr_{0, 0, static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32)} {}

    static constexpr result_type min() { return 0; }
    static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

    result_type operator()() {
        if (pos_ == 4) {
            out_ = bijection(ctr_, key_);
            if (++ctr_[0] == 0) ++ctr_[1];
            pos_ = 0;
        }
        return out_[pos_++];
    }

    /// The 10-round Philox bijection of one counter block.
    static Block bijection(Block ctr, std::array<std::uint32_t, 2> key) {
        constexpr std::uint32_t kM0 = 0xD2511F53u, kM1 = 0xCD9E8D57u;
        constexpr std::uint32_t kW0 = 0x9E3779B9u, kW1 = 0xBB67AE85u;
        for (int round = 0; round < 10; ++round) {
            const std::uint64_t p0 = static_cast<std::uint64_t>(kM0) * ctr[0];
            const std::uint64_t p1 = static_cast<std::uint64_t>(kM1) * ctr[2];
            const auto hi0 = static_cast<std::uint32_t>(p0 >> 32), lo0 = static_cast<std::uint32_t>(p0);
            const auto hi1 = static_cast<std::uint32_t>(p1 >> 32), lo1 = static_cast<std::uint32_t>(p1);
            ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
            key[0] += kW0;
            key[1] += kW1;
        }
        return ctr;
    }

private:
    std::array<std::uint32_t, 2> key_;
    Block ctr_;
    Block out_{};
    int pos_ = 4;
};

/// Standard normals drawn from an engine with the ziggurat method.
template <class Engine>
class NormalStream {
public:
    explicit NormalStream(Engine engine) : engine_(std::move(engine)) {}

    double operator()() { return dist_(engine_); }

private:
    Engine engine_;
    boost::random::normal_distribution<double> dist_;
};

}  // namespace sqrtsde
