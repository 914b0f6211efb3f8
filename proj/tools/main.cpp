#include <atomic>
#include <chrono>
#include <csignal>
#include <iostream>
#include <stop_token>
#include <thread>

#include "treeq/cli.hpp"

namespace {

std::atomic<bool> interrupted{false};

extern "C" void on_interrupt(int) { interrupted.store(true); }

}  // namespace

int main(int argc, char** argv) {
  std::signal(SIGINT, on_interrupt);
  std::signal(SIGTERM, on_interrupt);
  std::stop_source cancel;
  std::jthread watcher([&cancel](std::stop_token done) {
    while (!done.stop_requested()) {
      if (interrupted.load()) {
        std::cerr << "treeq: interrupted, finishing up\n";
        cancel.request_stop();
        return;
      }
      std::this_thread::sleep_for(std::chrono::milliseconds(50));
    }
  });
  return treeq::cli::main(argc, argv, std::cout, std::cerr, cancel.get_token());
}
