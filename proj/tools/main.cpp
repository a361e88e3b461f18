#include "codesearch/cli.hpp"

int main(int argc, char** argv) {
    return codesearch::run_cli({argv + 1, argv + argc});
}
