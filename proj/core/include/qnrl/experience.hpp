#pragma once

#include <cstddef>
#include <vector>

namespace qnrl {

/// One transition (s, a, r, s', terminal).
struct Experience {
    std::vector<double> s;
    std::size_t a = 0;
    double r = 0.0;
    std::vector<double> s_next;
    bool terminal = false;
};

/// Capacity-b transition buffer. The L-BFGS trainer consumes it whole and
/// clears it after every optimization step.
class ExperienceMemory {
public:
    explicit ExperienceMemory(std::size_t capacity);

    /// Throws InvalidInput when full.
    void push(Experience e);
    /// Push that drops the oldest entry when full (sliding window).
    void push_evicting(Experience e);
    void clear() {
        buffer_.clear();
        head_ = 0;
    }

    std::size_t size() const { return buffer_.size(); }
    std::size_t capacity() const { return capacity_; }
    bool empty() const { return buffer_.empty(); }
    bool full() const { return buffer_.size() == capacity_; }
    const std::vector<Experience>& items() const { return buffer_; }
    const Experience& operator[](std::size_t i) const { return buffer_[i]; }

private:
    std::size_t capacity_;
    std::vector<Experience> buffer_;
    std::size_t head_ = 0;  // next slot to overwrite once full
};

}  // namespace qnrl
