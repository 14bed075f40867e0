#pragma once

namespace lateralis::parallel {

int thread_count() noexcept;
void set_thread_count(int n) noexcept;

// Reads LATERALIS_THREADS; returns the thread count in effect afterwards.
int apply_env_override();

// Restores the previous thread count on scope exit.
class ScopedThreads {
public:
    explicit ScopedThreads(int n) noexcept : previous_(thread_count()) { set_thread_count(n); }
    ~ScopedThreads() { set_thread_count(previous_); }
    ScopedThreads(const ScopedThreads&) = delete;
    ScopedThreads& operator=(const ScopedThreads&) = delete;

private:
    int previous_;
};

}  // namespace lateralis::parallel
