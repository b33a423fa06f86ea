#include "hfl/cli.hpp"

int main(int argc, char** argv) { return hfl::dispatch(argc, argv); }
