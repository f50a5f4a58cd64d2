#include "aird/parallel.hpp"

#include <atomic>
#include <condition_variable>
#include <cstdlib>
#include <mutex>
#include <thread>
#include <vector>

namespace aird {
namespace {

thread_local bool t_inside_pool = false;

unsigned read_worker_count() {
    unsigned hw = std::thread::hardware_concurrency();
    if (hw == 0) hw = 1;
    if (const char* env = std::getenv("AIRD_THREADS")) {
        const long v = std::strtol(env, nullptr, 10);
        if (v >= 1) return static_cast<unsigned>(std::min<long>(v, 256));
    }
    return hw;
}

class Pool {
  public:
    static Pool& instance() {
        static Pool pool(read_worker_count());
        return pool;
    }

    unsigned workers() const { return nworkers_; }

    void run(std::size_t njobs, const std::function<void(std::size_t)>& job) {
        if (njobs == 0) return;
        if (njobs == 1 || nworkers_ <= 1 || t_inside_pool) {
            const bool saved = t_inside_pool;
            t_inside_pool = true;
            for (std::size_t i = 0; i < njobs; ++i) job(i);
            t_inside_pool = saved;
            return;
        }
        std::unique_lock<std::mutex> gate(run_mutex_);
        {
            std::lock_guard<std::mutex> lk(m_);
            job_ = &job;
            njobs_ = njobs;
            next_.store(0, std::memory_order_relaxed);
            pending_ = njobs;
            ++generation_;
        }
        cv_start_.notify_all();
        // The calling thread works too.
        work();
        std::unique_lock<std::mutex> lk(m_);
        cv_done_.wait(lk, [&] { return pending_ == 0; });
        job_ = nullptr;
    }

  private:
    explicit Pool(unsigned n) : nworkers_(n) {
        for (unsigned i = 0; i + 1 < n; ++i) {
            threads_.emplace_back([this] { worker_loop(); });
        }
    }

    ~Pool() {
        {
            std::lock_guard<std::mutex> lk(m_);
            stop_ = true;
        }
        cv_start_.notify_all();
        for (auto& t : threads_) t.join();
    }

    void worker_loop() {
        t_inside_pool = true;
        std::uint64_t seen = 0;
        for (;;) {
            {
                std::unique_lock<std::mutex> lk(m_);
                cv_start_.wait(lk, [&] { return stop_ || generation_ != seen; });
                if (stop_) return;
                seen = generation_;
            }
            work();
        }
    }

    void work() {
        const bool saved = t_inside_pool;
        t_inside_pool = true;
        for (;;) {
            const std::size_t i = next_.fetch_add(1, std::memory_order_relaxed);
            if (i >= njobs_) break;
            (*job_)(i);
            std::lock_guard<std::mutex> lk(m_);
            if (--pending_ == 0) cv_done_.notify_all();
        }
        t_inside_pool = saved;
    }

    unsigned nworkers_;
    std::vector<std::thread> threads_;
    std::mutex run_mutex_;  // one parallel region at a time
    std::mutex m_;
    std::condition_variable cv_start_, cv_done_;
    const std::function<void(std::size_t)>* job_ = nullptr;
    std::size_t njobs_ = 0;
    std::size_t pending_ = 0;
    std::atomic<std::size_t> next_{0};
    std::uint64_t generation_ = 0;
    bool stop_ = false;
};

}  // namespace

unsigned worker_count() { return Pool::instance().workers(); }

void parallel_jobs(std::size_t njobs, const std::function<void(std::size_t)>& job) {
    Pool::instance().run(njobs, job);
}

void parallel_chunks(std::size_t n, std::size_t chunk,
                     const std::function<void(std::size_t, std::size_t)>& body) {
    if (n == 0) return;
    if (chunk == 0) chunk = 1;
    const std::size_t nchunks = (n + chunk - 1) / chunk;
    parallel_jobs(nchunks, [&](std::size_t c) {
        const std::size_t lo = c * chunk;
        const std::size_t hi = std::min(n, lo + chunk);
        body(lo, hi);
    });
}

}  // namespace aird
