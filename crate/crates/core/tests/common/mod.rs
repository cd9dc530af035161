pub use qho_kam::sampling::random_real_part;
