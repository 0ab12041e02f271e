#pragma once

#include <condition_variable>
#include <cstddef>
#include <deque>
#include <mutex>
#include <optional>

#include "aclust/codec.hpp"
#include "aclust/engine.hpp"

namespace aclust {

/// Bounded FIFO for one producer and one consumer. `close()` lets the
/// consumer drain what is queued and then observe end of stream.
template <typename T>
class BoundedQueue {
  public:
    explicit BoundedQueue(std::size_t capacity) : capacity_(capacity ? capacity : 1) {}

    /// Returns false if the queue was closed before the item could be queued.
    bool push(T item) {
        std::unique_lock lock(mutex_);
        not_full_.wait(lock, [&] { return closed_ || items_.size() < capacity_; });
        if (closed_) return false;
        items_.push_back(std::move(item));
        not_empty_.notify_one();
        return true;
    }

    std::optional<T> pop() {
        std::unique_lock lock(mutex_);
        not_empty_.wait(lock, [&] { return closed_ || !items_.empty(); });
        if (items_.empty()) return std::nullopt;
        T item = std::move(items_.front());
        items_.pop_front();
        not_full_.notify_one();
        return item;
    }

    void close() {
        std::lock_guard lock(mutex_);
        closed_ = true;
        not_full_.notify_all();
        not_empty_.notify_all();
    }

  private:
    std::mutex mutex_;
    std::condition_variable not_full_;
    std::condition_variable not_empty_;
    std::deque<T> items_;
    std::size_t capacity_;
    bool closed_ = false;
};

/// Feeds every record from `reader` into `engine` in stream order. With a
/// non-zero `queue_capacity`, parsing runs on a separate thread ahead of
/// the engine. Parser and engine errors are rethrown on the caller's
/// thread. Returns the number of records processed.
std::uint64_t ingest(RecordReader& reader, Engine& engine, std::size_t queue_capacity = 1024);

}  // namespace aclust
