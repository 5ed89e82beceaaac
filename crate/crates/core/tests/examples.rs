macro_rules! example {
    ($name:ident, $file:literal) => {
        #[allow(dead_code)]
        #[path = $file]
        mod $name;

        #[test]
        fn $name() {
            $name::run_example().expect(concat!(stringify!($name), " should run"));
        }
    };
}

example!(signature_basics, "../examples/signature_basics.rs");
example!(brownian_rough_path, "../examples/brownian_rough_path.rs");
example!(lyons_extension, "../examples/lyons_extension.rs");
example!(special_functions, "../examples/special_functions.rs");
example!(rde_jacobian, "../examples/rde_jacobian.rs");
example!(moment_scan, "../examples/moment_scan.rs");
example!(factorial_decay, "../examples/factorial_decay.rs");
example!(cli_runner, "../examples/cli_runner.rs");
