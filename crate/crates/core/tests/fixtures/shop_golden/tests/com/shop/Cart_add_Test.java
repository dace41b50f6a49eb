package com.shop;

import org.junit.Test;

public class Cart_add_Test {

    @Test
    public void testAdd() throws Exception {
        Cart target = new Cart();
        target.add((Item) null);
        org.junit.Assert.assertNotNull(target);
    }
}
