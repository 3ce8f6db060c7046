#include <iostream>
#include <string>
#include <vector>

#if defined(__GLIBC__)
#include <malloc.h>
#endif

#include "freezenet/cli.hpp"

int main(int argc, char** argv) {
#if defined(__GLIBC__)
  // Activation buffers are reallocated every batch; keep them off mmap so pages stay faulted in.
  mallopt(M_MMAP_THRESHOLD, 1 << 30);
  mallopt(M_TRIM_THRESHOLD, 1 << 30);
#endif
  std::vector<std::string> args(argv + 1, argv + argc);
  return freezenet::run_cli(args, std::cout, std::cerr);
}
