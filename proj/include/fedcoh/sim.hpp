#pragma once

#include <coroutine>
#include <cstdint>
#include <exception>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "fedcoh/memcore.hpp"

namespace fedcoh {

// Lazily started coroutine returning T. Awaiting a Task runs it to completion
// (with symmetric transfer back to the awaiter).
template <class T = void>
class [[nodiscard]] Task;

namespace detail {

struct PromiseBase {
  std::coroutine_handle<> continuation = std::noop_coroutine();
  std::exception_ptr error;

  struct FinalAwaiter {
    bool await_ready() const noexcept { return false; }
    template <class P>
    std::coroutine_handle<> await_suspend(std::coroutine_handle<P> h) const noexcept {
      return h.promise().continuation;
    }
    void await_resume() const noexcept {}
  };

  std::suspend_always initial_suspend() const noexcept { return {}; }
  FinalAwaiter final_suspend() const noexcept { return {}; }
  void unhandled_exception() { error = std::current_exception(); }
};

template <class T>
struct Promise : PromiseBase {
  std::optional<T> value;
  Task<T> get_return_object();
  template <class U>
  void return_value(U&& v) {
    value.emplace(std::forward<U>(v));
  }
  T take() {
    if (error) std::rethrow_exception(error);
    return std::move(*value);
  }
};

template <>
struct Promise<void> : PromiseBase {
  Task<void> get_return_object();
  void return_void() {}
  void take() {
    if (error) std::rethrow_exception(error);
  }
};

}  // namespace detail

template <class T>
class [[nodiscard]] Task {
 public:
  using promise_type = detail::Promise<T>;
  using Handle = std::coroutine_handle<promise_type>;

  Task() = default;
  explicit Task(Handle h) : h_(h) {}
  Task(Task&& o) noexcept : h_(std::exchange(o.h_, {})) {}
  Task& operator=(Task&& o) noexcept {
    if (this != &o) {
      if (h_) h_.destroy();
      h_ = std::exchange(o.h_, {});
    }
    return *this;
  }
  Task(const Task&) = delete;
  Task& operator=(const Task&) = delete;
  ~Task() {
    if (h_) h_.destroy();
  }

  bool await_ready() const noexcept { return false; }
  std::coroutine_handle<> await_suspend(std::coroutine_handle<> awaiter) noexcept {
    h_.promise().continuation = awaiter;
    return h_;
  }
  T await_resume() { return h_.promise().take(); }

  Handle handle() const { return h_; }
  bool done() const { return h_ && h_.done(); }

 private:
  Handle h_;
};

namespace detail {
template <class T>
Task<T> Promise<T>::get_return_object() {
  return Task<T>(std::coroutine_handle<Promise<T>>::from_promise(*this));
}
inline Task<void> Promise<void>::get_return_object() {
  return Task<void>(std::coroutine_handle<Promise<void>>::from_promise(*this));
}
}  // namespace detail

class Scheduler;

class StepLimitExceeded : public std::runtime_error {
 public:
  explicit StepLimitExceeded(std::uint64_t steps)
      : std::runtime_error("scheduler step limit exceeded after " + std::to_string(steps) + " steps") {}
};

// A simulated processor. Each memory operation is a scheduling point: with a
// Scheduler attached, the coroutine parks until the scheduler picks it; without
// one, operations execute immediately on the calling thread.
class Proc {
 public:
  Proc(MemorySystem& mem, ProcId id) : mem_(&mem), id_(id), node_(mem.topology().node(id)) {}

  ProcId id() const { return id_; }
  NodeId node() const { return node_; }
  MemorySystem& mem() const { return *mem_; }
  Scheduler* scheduler() const { return sched_; }

  template <class F>
  struct Op {
    Proc* proc;
    F fn;
    bool await_ready() const noexcept { return proc->sched_ == nullptr; }
    void await_suspend(std::coroutine_handle<> h) const;
    decltype(auto) await_resume() { return fn(); }
  };

  template <class F>
  Op<F> op(F fn) {
    return Op<F>{this, std::move(fn)};
  }

  auto read(LocId l) {
    return op([this, l] { return mem_->read(id_, l); });
  }
  auto write(LocId l, Value v) {
    return op([this, l, v] { mem_->write(id_, l, v); });
  }
  auto flush_line(LocId l) {
    return op([this, l] { mem_->flush_line(id_, l); });
  }
  auto flush_all() {
    return op([this] { mem_->flush_all(id_); });
  }
  auto cas(LocId l, Value expected, Value desired) {
    return op([this, l, expected, desired] { return mem_->atomic_cas(id_, l, expected, desired); });
  }
  auto faa(LocId l, Value delta) {
    return op([this, l, delta] { return mem_->atomic_faa(id_, l, delta); });
  }
  auto read_bypass(LocId l) {
    return op([this, l] { return mem_->read_bypass(id_, l); });
  }
  auto write_bypass(LocId l, Value v) {
    return op([this, l, v] { mem_->write_bypass(id_, l, v); });
  }
  // Scheduling point without a memory operation (spin loops on host state).
  auto yield() {
    return op([this] {
      if (sched_ == nullptr) std::this_thread::yield();
    });
  }

 private:
  friend class Scheduler;
  MemorySystem* mem_;
  ProcId id_;
  NodeId node_;
  Scheduler* sched_ = nullptr;
  std::size_t slot_ = 0;
};

// Seeded random interleaving of processor coroutines, one operation per step.
class Scheduler {
 public:
  explicit Scheduler(std::uint64_t seed) : rng_(seed) {}
  Scheduler(const Scheduler&) = delete;
  Scheduler& operator=(const Scheduler&) = delete;

  void spawn(Proc& p, Task<void> task) {
    if (p.sched_ != nullptr) throw UsageError("processor already bound to a scheduler");
    p.sched_ = this;
    p.slot_ = roots_.size();
    Root r;
    r.proc = &p;
    r.parked = task.handle();
    r.task = std::move(task);
    roots_.push_back(std::move(r));
  }

  // Runs until every task finishes. Throws if max_steps is exceeded.
  void run(std::uint64_t max_steps = 1'000'000'000) {
    std::vector<std::size_t> live;
    for (std::size_t i = 0; i < roots_.size(); ++i) {
      if (!roots_[i].task.done()) live.push_back(i);
    }
    while (!live.empty()) {
      if (steps_ >= max_steps) throw StepLimitExceeded(steps_);
      std::uniform_int_distribution<std::size_t> pick(0, live.size() - 1);
      const std::size_t k = pick(rng_);
      Root& r = roots_[live[k]];
      auto h = std::exchange(r.parked, {});
      ++steps_;
      h.resume();
      if (r.task.done()) {
        r.proc->sched_ = nullptr;
        live[k] = live.back();
        live.pop_back();
        r.task.await_resume();  // rethrows a failure
      } else if (!r.parked) {
        throw std::logic_error("task suspended outside a processor operation");
      }
    }
  }

  std::uint64_t steps() const { return steps_; }

 private:
  template <class F>
  friend struct Proc::Op;

  void park(std::size_t slot, std::coroutine_handle<> h) { roots_[slot].parked = h; }

  struct Root {
    Proc* proc = nullptr;
    Task<void> task;
    std::coroutine_handle<> parked;
  };

  std::mt19937_64 rng_;
  std::vector<Root> roots_;
  std::uint64_t steps_ = 0;
};

template <class F>
void Proc::Op<F>::await_suspend(std::coroutine_handle<> h) const {
  proc->sched_->park(proc->slot_, h);
}

// Runs a task to completion on the calling thread (no scheduler).
template <class T>
T sync_wait(Task<T> task) {
  task.handle().resume();
  if (!task.done()) throw std::logic_error("sync_wait: task suspended; processor bound to a scheduler?");
  return task.await_resume();
}

}  // namespace fedcoh
