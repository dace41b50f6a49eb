package com.shop;

import org.junit.Test;

public class Cart_isEmpty_Test {

    @Test
    public void testIsEmpty() throws Exception {
        Cart target = new Cart();
        target.isEmpty();
        org.junit.Assert.assertNotNull(target);
    }
}
