// placeholder
pub struct X;
