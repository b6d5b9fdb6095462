#pragma once

#include <atomic>
#include <condition_variable>
#include <functional>
#include <memory>
#include <mutex>
#include <thread>
#include <vector>

namespace pbad {

/// Round-based worker pool. Each run() distributes indices [0, count)
/// across the workers and blocks until every index has been processed.
/// With a single worker the work runs on the calling thread in index
/// order, which keeps the degenerate case deterministic.
class WorkerPool {
  struct Batch {
    const std::function<void(int)>* fn = nullptr;
    int count = 0;
    std::atomic<int> next{0};
    std::atomic<int> remaining{0};
    std::mutex m;
    std::condition_variable done;
  };

 public:
  explicit WorkerPool(int workers) : worker_count_(workers < 1 ? 1 : workers) {
    for (int w = 1; w < worker_count_; ++w) {
      threads_.emplace_back([this] { worker_loop(); });
    }
  }

  ~WorkerPool() {
    {
      std::lock_guard<std::mutex> lock(mutex_);
      stopping_ = true;
    }
    cv_start_.notify_all();
    for (auto& t : threads_) t.join();
  }

  WorkerPool(const WorkerPool&) = delete;
  WorkerPool& operator=(const WorkerPool&) = delete;

  int worker_count() const { return worker_count_; }

  void run(int count, const std::function<void(int)>& fn) {
    if (count <= 0) return;
    if (worker_count_ == 1 || count == 1) {
      for (int i = 0; i < count; ++i) fn(i);
      return;
    }
    auto batch = std::make_shared<Batch>();
    batch->fn = &fn;
    batch->count = count;
    batch->remaining.store(count, std::memory_order_relaxed);
    {
      std::lock_guard<std::mutex> lock(mutex_);
      current_ = batch;
      ++generation_;
    }
    cv_start_.notify_all();
    drain(*batch);
    std::unique_lock<std::mutex> lock(batch->m);
    batch->done.wait(lock, [&] {
      return batch->remaining.load(std::memory_order_acquire) == 0;
    });
  }

 private:
  static void drain(Batch& b) {
    int i;
    while ((i = b.next.fetch_add(1, std::memory_order_relaxed)) < b.count) {
      (*b.fn)(i);
      if (b.remaining.fetch_sub(1, std::memory_order_acq_rel) == 1) {
        std::lock_guard<std::mutex> lock(b.m);
        b.done.notify_all();
      }
    }
  }

  void worker_loop() {
    long seen = 0;
    while (true) {
      std::shared_ptr<Batch> batch;
      {
        std::unique_lock<std::mutex> lock(mutex_);
        cv_start_.wait(lock, [&] { return stopping_ || generation_ != seen; });
        if (stopping_) return;
        seen = generation_;
        batch = current_;
      }
      if (batch) drain(*batch);
    }
  }

  const int worker_count_;
  std::vector<std::thread> threads_;
  std::mutex mutex_;
  std::condition_variable cv_start_;
  std::shared_ptr<Batch> current_;
  long generation_ = 0;
  bool stopping_ = false;
};

}  // namespace pbad
