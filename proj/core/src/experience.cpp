#include "qnrl/experience.hpp"

#include "qnrl/errors.hpp"

namespace qnrl {

ExperienceMemory::ExperienceMemory(std::size_t capacity) : capacity_(capacity) {
    if (capacity == 0) throw InvalidInput("ExperienceMemory: capacity must be positive");
    buffer_.reserve(capacity);
}

void ExperienceMemory::push(Experience e) {
    if (full()) throw InvalidInput("ExperienceMemory: buffer is full");
    buffer_.push_back(std::move(e));
}

void ExperienceMemory::push_evicting(Experience e) {
    if (!full()) {
        buffer_.push_back(std::move(e));
        return;
    }
    buffer_[head_] = std::move(e);
    head_ = (head_ + 1) % capacity_;
}

}  // namespace qnrl
