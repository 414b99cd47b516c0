#pragma once

#include <condition_variable>
#include <cstddef>
#include <exception>
#include <functional>
#include <mutex>
#include <thread>
#include <vector>

namespace gffpin {

/// Fixed-size pool that runs indexed task batches to completion.
///
/// Results must be written to slots keyed by task index; the pool makes no promise
/// about which worker runs which task. A pool of size 1 runs everything inline.
class WorkerPool {
 public:
  explicit WorkerPool(unsigned workers = 1);
  ~WorkerPool();
  WorkerPool(const WorkerPool&) = delete;
  WorkerPool& operator=(const WorkerPool&) = delete;

  unsigned size() const { return workers_; }

  /// Calls fn(i) for i in [0, tasks); blocks until all calls return. The first exception
  /// thrown by a task is rethrown here.
  void run(std::size_t tasks, const std::function<void(std::size_t)>& fn);

 private:
  void worker_loop();
  void drain();

  unsigned workers_;
  std::vector<std::thread> threads_;
  std::mutex mutex_;
  std::condition_variable wake_;
  std::condition_variable done_;
  const std::function<void(std::size_t)>* job_ = nullptr;
  std::size_t tasks_ = 0;
  std::size_t next_ = 0;
  std::size_t finished_ = 0;
  std::size_t generation_ = 0;
  bool stop_ = false;
  std::exception_ptr error_;
};

/// Worker count from GFFPIN_WORKERS, else 1.
unsigned default_worker_count();

}  // namespace gffpin
