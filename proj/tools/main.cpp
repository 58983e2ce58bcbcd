#include <cstdio>

int main() {
    std::puts("tpg: command line surface under construction");
    return 0;
}
