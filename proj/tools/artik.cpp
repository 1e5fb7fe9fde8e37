#include <cstdio>

int main() {
    std::puts("artik: cli not wired yet");
    return 2;
}
