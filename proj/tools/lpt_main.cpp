#include <cstdio>

int main() {
  std::puts("lpt: subcommands not wired yet");
  return 2;
}
