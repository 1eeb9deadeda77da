#include "auda/threading.hpp"

#include <atomic>
#include <condition_variable>
#include <mutex>
#include <thread>
#include <vector>

namespace auda {

namespace {

class Pool {
 public:
  explicit Pool(int workers) : target_workers_(workers) { spawn(); }

  ~Pool() {
    {
      std::unique_lock lk(mu_);
      stop_ = true;
      ++generation_;
    }
    cv_.notify_all();
    for (auto& t : threads_) t.join();
  }

  int size() const { return int(threads_.size()) + 1; }

  void run(int64_t n, const std::function<void(int64_t, int64_t)>& fn) {
    const int total = size();
    pending_.store(int(threads_.size()), std::memory_order_relaxed);
    {
      std::unique_lock lk(mu_);
      job_ = &fn;
      job_n_ = n;
      ++generation_;
    }
    cv_.notify_all();
    // main thread takes slice 0
    exec_slice(n, fn, 0, total);
    std::unique_lock lk(mu_);
    done_cv_.wait(lk, [&] { return pending_.load() == 0; });
    job_ = nullptr;
  }

  static void exec_slice(int64_t n, const std::function<void(int64_t, int64_t)>& fn,
                         int idx, int total) {
    int64_t begin = n * idx / total;
    int64_t end = n * (idx + 1) / total;
    if (begin < end) fn(begin, end);
  }

 private:
  void spawn() {
    for (int i = 1; i < target_workers_; ++i) {
      threads_.emplace_back([this, i] { worker(i); });
    }
  }

  void worker(int idx) {
    uint64_t seen = 0;
    for (;;) {
      const std::function<void(int64_t, int64_t)>* job = nullptr;
      int64_t n = 0;
      {
        std::unique_lock lk(mu_);
        cv_.wait(lk, [&] { return generation_ != seen; });
        seen = generation_;
        if (stop_) return;
        job = job_;
        n = job_n_;
      }
      if (job) exec_slice(n, *job, idx, int(threads_.size()) + 1);
      if (pending_.fetch_sub(1) == 1) {
        std::unique_lock lk(mu_);
        done_cv_.notify_all();
      }
    }
  }

  int target_workers_;
  std::vector<std::thread> threads_;
  std::mutex mu_;
  std::condition_variable cv_;
  std::condition_variable done_cv_;
  const std::function<void(int64_t, int64_t)>* job_ = nullptr;
  int64_t job_n_ = 0;
  uint64_t generation_ = 0;
  std::atomic<int> pending_{0};
  bool stop_ = false;
};

int g_num_threads = []() {
  unsigned hc = std::thread::hardware_concurrency();
  return hc == 0 ? 1 : int(hc);
}();

Pool* g_pool = nullptr;
std::mutex g_pool_mu;

}  // namespace

void set_num_threads(int n) {
  std::unique_lock lk(g_pool_mu);
  if (n == 0) {
    unsigned hc = std::thread::hardware_concurrency();
    n = hc == 0 ? 1 : int(hc);
  }
  if (n < 1) n = 1;
  if (n == g_num_threads) return;
  delete g_pool;
  g_pool = nullptr;
  g_num_threads = n;
}

int num_threads() { return g_num_threads; }

void parallel_for(int64_t n, const std::function<void(int64_t, int64_t)>& fn) {
  if (n <= 0) return;
  if (g_num_threads == 1 || n == 1) {
    fn(0, n);
    return;
  }
  {
    std::unique_lock lk(g_pool_mu);
    if (!g_pool) g_pool = new Pool(g_num_threads);
  }
  g_pool->run(n, fn);
}

}  // namespace auda
