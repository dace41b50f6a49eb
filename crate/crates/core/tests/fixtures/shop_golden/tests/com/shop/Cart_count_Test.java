package com.shop;

import org.junit.Test;

public class Cart_count_Test {

    @Test
    public void testCount() throws Exception {
        Cart target = new Cart();
        target.count("");
        org.junit.Assert.assertNotNull(target);
    }
}
