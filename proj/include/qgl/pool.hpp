#pragma once

#include <condition_variable>
#include <exception>
#include <functional>
#include <mutex>
#include <thread>
#include <vector>

namespace qgl {

// Persistent pool of N threads. run(f) executes f(0..N-1), one call per
// thread, and returns after all have finished. The control thread may touch
// worker-owned data freely between run() calls.
class WorkerPool {
 public:
  explicit WorkerPool(int n) : n_(n) {
    if (n_ > 1) {
      threads_.reserve(n_ - 1);
      for (int i = 1; i < n_; ++i) {
        threads_.emplace_back([this, i] { loop(i); });
      }
    }
  }

  ~WorkerPool() {
    {
      std::lock_guard<std::mutex> lk(mu_);
      stop_ = true;
      ++generation_;
    }
    cv_.notify_all();
    for (auto& t : threads_) t.join();
  }

  WorkerPool(const WorkerPool&) = delete;
  WorkerPool& operator=(const WorkerPool&) = delete;

  void run(const std::function<void(int)>& job) {
    if (n_ == 1) {
      job(0);
      return;
    }
    {
      std::lock_guard<std::mutex> lk(mu_);
      job_ = &job;
      pending_ = n_ - 1;
      first_error_ = nullptr;
      ++generation_;
    }
    cv_.notify_all();
    run_guarded(job, 0);
    std::unique_lock<std::mutex> lk(mu_);
    done_cv_.wait(lk, [this] { return pending_ == 0; });
    job_ = nullptr;
    if (first_error_) std::rethrow_exception(first_error_);
  }

  int size() const { return n_; }

 private:
  void run_guarded(const std::function<void(int)>& job, int idx) {
    try {
      job(idx);
    } catch (...) {
      std::lock_guard<std::mutex> lk(mu_);
      if (!first_error_) first_error_ = std::current_exception();
    }
  }

  void loop(int idx) {
    uint64_t seen = 0;
    while (true) {
      const std::function<void(int)>* job = nullptr;
      {
        std::unique_lock<std::mutex> lk(mu_);
        cv_.wait(lk, [&] { return stop_ || generation_ != seen; });
        seen = generation_;
        if (stop_) return;
        job = job_;
      }
      if (job) {
        run_guarded(*job, idx);
        std::lock_guard<std::mutex> lk(mu_);
        if (--pending_ == 0) done_cv_.notify_one();
      }
    }
  }

  int n_;
  std::vector<std::thread> threads_;
  std::mutex mu_;
  std::condition_variable cv_;
  std::condition_variable done_cv_;
  const std::function<void(int)>* job_ = nullptr;
  uint64_t generation_ = 0;
  int pending_ = 0;
  bool stop_ = false;
  std::exception_ptr first_error_ = nullptr;
};

}  // namespace qgl
