#include <cstdio>

int main() {
    std::puts("distint: placeholder");
    return 0;
}
