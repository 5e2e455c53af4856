#pragma once

#include <atomic>
#include <future>
#include <memory>

#include "deer/generation.hpp"

namespace deer {

/// Shared cancellation flag. Copies observe the same flag.
class CancelToken {
 public:
  CancelToken() : flag_(std::make_shared<std::atomic<bool>>(false)) {}

  void request_cancel() noexcept { flag_->store(true, std::memory_order_relaxed); }
  bool cancel_requested() const noexcept { return flag_->load(std::memory_order_relaxed); }

 private:
  std::shared_ptr<std::atomic<bool>> flag_;
};

/**
 * A thing that generates tokens with probabilities.
 *
 * Implementations must allow multiple in-flight generate() calls from
 * different threads; each call's result is owned by its caller and no state
 * is shared across calls beyond internal connection pooling.
 */
class Backend {
 public:
  virtual ~Backend() = default;

  virtual GenerationResult generate(const GenerationRequest& request,
                                    CancelToken cancel) = 0;

  GenerationResult generate(const GenerationRequest& request) {
    return generate(request, CancelToken{});
  }

  /// True when identical requests always yield identical results.
  virtual bool deterministic() const { return false; }

  /// True when GenerationResult::duration_ms reports simulated ticks and the
  /// backend honors GenerationRequest::tick_budget. Controllers use this to
  /// schedule branch-parallel runs on a virtual clock instead of real threads.
  virtual bool virtual_time() const { return false; }
};

/**
 * One in-flight generate() call running on its own thread.
 *
 * cancel() asks the backend to stop promptly; the partial result is returned
 * by wait() with FinishReason::cancelled so callers can account for the
 * tokens it consumed before discarding it. Cancelling a completed call is a
 * no-op.
 */
class InflightCall {
 public:
  InflightCall() = default;

  static InflightCall start(Backend& backend, GenerationRequest request) {
    InflightCall call;
    CancelToken token = call.token_;
    call.future_ = std::async(std::launch::async,
                              [&backend, request = std::move(request), token]() {
                                return backend.generate(request, token);
                              })
                       .share();
    return call;
  }

  bool valid() const { return future_.valid(); }

  bool done() const {
    return future_.valid() &&
           future_.wait_for(std::chrono::seconds(0)) == std::future_status::ready;
  }

  void cancel() noexcept { token_.request_cancel(); }

  /// Blocks until the call finishes. Rethrows any backend error.
  GenerationResult wait() { return future_.get(); }

 private:
  CancelToken token_;
  std::shared_future<GenerationResult> future_;
};

}  // namespace deer
