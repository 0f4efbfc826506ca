#include <cstdio>

int main() {
  std::puts("divc: placeholder");
  return 0;
}
