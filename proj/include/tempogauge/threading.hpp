#pragma once

#include <condition_variable>
#include <cstddef>
#include <functional>
#include <mutex>
#include <queue>
#include <thread>
#include <vector>

namespace tempogauge {

// Persistent worker pool. parallel_for splits [0, n) into one contiguous
// chunk per worker; chunk boundaries depend only on n and the job count, and
// no reduction ever crosses a chunk, so any code built on it produces
// bit-identical results for every job count.
class ThreadPool {
 public:
  explicit ThreadPool(unsigned jobs) {
    if (jobs < 1) jobs = 1;
    for (unsigned i = 0; i + 1 < jobs; ++i) {
      workers_.emplace_back([this] { worker_loop(); });
    }
  }

  ThreadPool(const ThreadPool&) = delete;
  ThreadPool& operator=(const ThreadPool&) = delete;

  ~ThreadPool() {
    {
      std::lock_guard<std::mutex> lock(mu_);
      stop_ = true;
    }
    cv_.notify_all();
    for (auto& w : workers_) w.join();
  }

  // Worker threads plus the calling thread.
  unsigned size() const { return static_cast<unsigned>(workers_.size()) + 1; }

  // Runs all tasks, the last one inline, and blocks until every task is done.
  void run(std::vector<std::function<void()>> tasks) {
    if (tasks.empty()) return;
    std::function<void()> inline_task = std::move(tasks.back());
    tasks.pop_back();
    std::size_t posted = tasks.size();
    if (posted > 0) {
      {
        std::lock_guard<std::mutex> lock(mu_);
        pending_ += posted;
        for (auto& t : tasks) queue_.push(std::move(t));
      }
      cv_.notify_all();
    }
    inline_task();
    if (posted > 0) {
      std::unique_lock<std::mutex> lock(mu_);
      done_cv_.wait(lock, [this] { return pending_ == 0; });
    }
  }

  // True on pool worker threads; nested parallel_for calls run inline there
  // instead of re-entering the pool, which would deadlock.
  static bool in_worker() { return in_worker_flag(); }

 private:
  static bool& in_worker_flag() {
    static thread_local bool flag = false;
    return flag;
  }

  void worker_loop() {
    in_worker_flag() = true;
    for (;;) {
      std::function<void()> task;
      {
        std::unique_lock<std::mutex> lock(mu_);
        cv_.wait(lock, [this] { return stop_ || !queue_.empty(); });
        if (stop_ && queue_.empty()) return;
        task = std::move(queue_.front());
        queue_.pop();
      }
      task();
      {
        std::lock_guard<std::mutex> lock(mu_);
        if (--pending_ == 0) done_cv_.notify_all();
      }
    }
  }

  std::vector<std::thread> workers_;
  std::queue<std::function<void()>> queue_;
  std::mutex mu_;
  std::condition_variable cv_;
  std::condition_variable done_cv_;
  std::size_t pending_ = 0;
  bool stop_ = false;
};

namespace detail {
inline unsigned& job_count() {
  static unsigned jobs = std::thread::hardware_concurrency()
                             ? std::thread::hardware_concurrency()
                             : 1;
  return jobs;
}
}  // namespace detail

// Process-wide job count; set once at startup (CLI --jobs / --deterministic).
inline void set_jobs(unsigned n) { detail::job_count() = n < 1 ? 1 : n; }
inline unsigned jobs() { return detail::job_count(); }

inline ThreadPool& global_pool() {
  static ThreadPool pool(std::thread::hardware_concurrency()
                             ? std::thread::hardware_concurrency()
                             : 1);
  return pool;
}

// fn(begin, end) over a fixed partition of [0, n).
template <class F>
void parallel_for(std::size_t n, F&& fn) {
  if (n == 0) return;
  unsigned want = jobs();
  if (want <= 1 || n == 1 || ThreadPool::in_worker()) {
    fn(std::size_t{0}, n);
    return;
  }
  ThreadPool& pool = global_pool();
  std::size_t chunks = std::min<std::size_t>(std::min<unsigned>(want, pool.size()), n);
  if (chunks <= 1) {
    fn(std::size_t{0}, n);
    return;
  }
  std::vector<std::function<void()>> tasks;
  tasks.reserve(chunks);
  std::size_t base = n / chunks, extra = n % chunks, begin = 0;
  for (std::size_t i = 0; i < chunks; ++i) {
    std::size_t len = base + (i < extra ? 1 : 0);
    std::size_t end = begin + len;
    tasks.push_back([&fn, begin, end] { fn(begin, end); });
    begin = end;
  }
  pool.run(std::move(tasks));
}

}  // namespace tempogauge
